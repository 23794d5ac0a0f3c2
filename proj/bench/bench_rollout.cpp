// Rollout collection benchmark: the serial reference path (workers = 1)
// against the OpenMP wave-parallel path, with an equivalence check that both
// produce bit-identical buffers.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "diplomat/training.hpp"

using namespace diplomat;
using Clock = std::chrono::steady_clock;

namespace {

double time_collect(const hcn::HcnParams& params, const training::OpponentPool& pool,
                    const training::StageConfig& stage, const training::PadShape& pad,
                    int count, std::uint64_t seed, int workers,
                    training::RolloutBuffer* out = nullptr) {
  auto t0 = Clock::now();
  training::RolloutBuffer buf =
      training::collect_rollouts(params, pool, stage, pad, {}, count, seed, workers);
  double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  if (out) *out = std::move(buf);
  return dt;
}

bool same_buffer(const training::RolloutBuffer& a, const training::RolloutBuffer& b) {
  if (a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    if (a.steps[i].observation != b.steps[i].observation) return false;
    if (a.steps[i].log_prob != b.steps[i].log_prob) return false;
    if (a.steps[i].advantage != b.steps[i].advantage) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int count = argc > 1 ? std::atoi(argv[1]) : 4096;
  int max_workers = 1;
#ifdef _OPENMP
  max_workers = argc > 2 ? std::atoi(argv[2]) : omp_get_max_threads();
#endif

  training::StageConfig stage;
  stage.generator.num_agents = 4;
  stage.generator.num_issues = 3;
  stage.generator.num_values = {5};

  training::CurriculumConfig cc;
  cc.stages = {stage};
  training::PadShape pad = training::pad_shape_of(cc);
  hcn::HcnConfig net;
  net.d = 32;
  net.heads = 4;
  net.d_msg = 16;
  hcn::HcnParams params =
      hcn::HcnParams::init(pad.num_agents, pad.num_issues, pad.num_values, net, 1);
  training::OpponentPool pool({});

  std::printf("rollout collection, %d steps, N=4 M=3 V=5, d=%d\n", count, net.d);

  training::RolloutBuffer serial_buf;
  double t_serial = time_collect(params, pool, stage, pad, count, 7, 1, &serial_buf);
  std::printf("  workers  1 (serial reference): %8.3f s  %8.0f steps/s\n", t_serial,
              count / t_serial);

  for (int w = 2; w <= max_workers; w *= 2) {
    training::RolloutBuffer buf;
    double t = time_collect(params, pool, stage, pad, count, 7, w, &buf);
    std::printf("  workers %2d:                    %8.3f s  %8.0f steps/s  x%.2f  %s\n", w, t,
                count / t, t_serial / t,
                same_buffer(serial_buf, buf) ? "bit-identical" : "MISMATCH");
    if (!same_buffer(serial_buf, buf)) return 1;
  }
  return 0;
}
