#include "diplomat/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "diplomat/rewards.hpp"

namespace diplomat::training {

using num::Tensor;
using num::Var;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

void PpoConfig::validate() const {
  if (!(clip > 0 && clip < 1)) throw TrainError("ppo clip must be in (0,1)");
  if (!(gamma >= 0 && gamma < 1)) throw TrainError("ppo gamma must be in [0,1)");
  if (!(gae_lambda >= 0 && gae_lambda <= 1)) throw TrainError("ppo gae_lambda must be in [0,1]");
  if (epochs < 1 || minibatch_size < 1 || steps_per_iteration < 1)
    throw TrainError("ppo epochs/minibatch/steps must be positive");
}

std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    const std::vector<std::uint8_t>& dones, double gamma, double gae_lambda,
    double last_value) {
  std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw TrainError("gae: reward/value/done length mismatch");
  std::vector<double> adv(n, 0.0), ret(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    double next_v = dones[i] ? 0.0 : (i + 1 < n ? values[i + 1] : last_value);
    double delta = rewards[i] + gamma * next_v - values[i];
    running = delta + gamma * gae_lambda * (dones[i] ? 0.0 : running);
    adv[i] = running;
    ret[i] = adv[i] + values[i];
  }
  return {std::move(adv), std::move(ret)};
}

void OpponentPool::maybe_snapshot(const hcn::HcnParams& params, int iteration) {
  if (cfg_.snapshot_every <= 0 || iteration % cfg_.snapshot_every != 0) return;
  snapshots_.push_back(params);
  while (static_cast<int>(snapshots_.size()) > cfg_.capacity) snapshots_.pop_front();
}

const hcn::HcnParams& OpponentPool::sample(const hcn::HcnParams& current,
                                           std::mt19937_64& rng) const {
  if (snapshots_.empty()) return current;
  std::uniform_int_distribution<std::size_t> pick(0, snapshots_.size() - 1);
  return snapshots_[pick(rng)];
}

CurriculumConfig default_curriculum() {
  CurriculumConfig c;
  auto gen = [](int agents, int issues, int values) {
    domain::GeneratorConfig g;
    g.num_agents = agents;
    g.num_issues = issues;
    g.num_values = {values};
    return g;
  };
  StageConfig s1;
  s1.generator = gen(2, 1, 5);
  StageConfig s2;
  s2.generator = gen(2, 3, 5);
  StageConfig s3;
  s3.generator = gen(4, 1, 5);
  StageConfig s4;
  s4.generator = gen(4, 3, 5);
  StageConfig s5;
  s5.generator = gen(2, 1, 5);
  s5.randomized = true;
  s5.exploiter_fraction = 0.25;
  c.stages = {s1, s2, s3, s4, s5};
  return c;
}

int curriculum_advance(const std::vector<double>& consensus_history, int stage,
                       const CurriculumConfig& cfg) {
  int last = static_cast<int>(cfg.stages.size()) - 1;
  if (stage >= last) return last;
  if (static_cast<int>(consensus_history.size()) < cfg.window) return stage;
  double acc = 0;
  for (std::size_t i = consensus_history.size() - cfg.window; i < consensus_history.size(); ++i)
    acc += consensus_history[i];
  return acc / cfg.window >= cfg.threshold ? stage + 1 : stage;
}

domain::Scenario stage_scenario(const StageConfig& stage, std::uint64_t seed) {
  domain::GeneratorConfig g = stage.generator;
  if (stage.randomized) {
    std::mt19937_64 rng(mix_seed(seed, 77));
    g.num_agents = std::uniform_int_distribution<int>(stage.agents_min, stage.agents_max)(rng);
    g.num_issues = std::uniform_int_distribution<int>(stage.issues_min, stage.issues_max)(rng);
    g.budgets.rounds = {1, std::uniform_int_distribution<int>(1, 2)(rng),
                        std::uniform_int_distribution<int>(3, 5)(rng),
                        std::uniform_int_distribution<int>(1, 2)(rng),
                        std::uniform_int_distribution<int>(2, 3)(rng)};
    g.reservation_max = std::uniform_real_distribution<double>(0.2, 0.4)(rng);
  }
  return domain::random_scenario(g, seed);
}

PadShape pad_shape_of(const CurriculumConfig& cfg) {
  PadShape p;
  p.num_agents = 2;
  p.num_issues = 1;
  int max_v = 2;
  for (const auto& s : cfg.stages) {
    p.num_agents = std::max(p.num_agents,
                            s.randomized ? s.agents_max : s.generator.num_agents);
    p.num_issues = std::max(p.num_issues,
                            s.randomized ? s.issues_max : s.generator.num_issues);
    for (int v : s.generator.num_values) max_v = std::max(max_v, v);
  }
  p.num_values.assign(p.num_issues, max_v);
  return p;
}

namespace {

struct SeatAssignment {
  enum class Kind { Learner, Pool, Exploiter };
  Kind kind = Kind::Learner;
  const hcn::HcnParams* params = nullptr;  // Pool
  int exploiter_type = 0;                  // 0,1: conceder; 2: alternating; 3: random
};

struct EpisodeOutput {
  std::vector<StepRecord> steps;
  EpisodeStats stats;
};

EpisodeOutput run_episode(const hcn::HcnParams& params, const OpponentPool& pool,
                          const StageConfig& stage, const PadShape& pad,
                          const env::EnvConfig& env_cfg, std::uint64_t episode_seed,
                          const hcn::AblationFlags& flags, double gamma, double gae_lambda) {
  std::mt19937_64 rng(episode_seed);
  domain::Scenario sc = stage_scenario(stage, mix_seed(episode_seed, 1));
  env::Env e(sc, env_cfg, mix_seed(episode_seed, 2));
  int N = sc.num_agents;

  std::vector<SeatAssignment> seats(N);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 1; i < N; ++i) {
    if (unif(rng) < stage.exploiter_fraction) {
      seats[i].kind = SeatAssignment::Kind::Exploiter;
      seats[i].exploiter_type = std::uniform_int_distribution<int>(0, 3)(rng);
    } else if (unif(rng) < pool.config().p_hist) {
      seats[i].kind = SeatAssignment::Kind::Pool;
      seats[i].params = &pool.sample(params, rng);
    }
  }

  std::vector<baselines::AlternatingOffersState> alt_mem(N);
  std::vector<std::vector<StepRecord>> per_seat(N);

  while (!e.done()) {
    std::vector<env::AgentAction> actions(N);
    std::vector<int> recorded;  // learner seats that appended a record this step
    for (int i = 0; i < N; ++i) {
      const auto& seat = seats[i];
      if (seat.kind == SeatAssignment::Kind::Exploiter) {
        switch (seat.exploiter_type) {
          case 0: actions[i] = baselines::conceder_policy(e.state(), sc, i, 0.5,
                                                          env_cfg.protocol_opts); break;
          case 1: actions[i] = baselines::conceder_policy(e.state(), sc, i, 2.0,
                                                          env_cfg.protocol_opts); break;
          case 2: actions[i] = baselines::alternating_offers_policy(alt_mem[i], e.state(), sc,
                                                                    i, env_cfg.protocol_opts); break;
          default: actions[i] = baselines::random_policy(e.state(), sc, i, rng,
                                                         env_cfg.protocol_opts); break;
        }
        continue;
      }
      const hcn::HcnParams& net =
          seat.kind == SeatAssignment::Kind::Pool ? *seat.params : params;
      env::Observation obs =
          env::pad_observation(e.observations()[i], sc, pad.num_agents, pad.num_values);
      auto mask = e.illegal_tag_mask(i);
      hcn::SampledAction s = hcn::sample_action(net, obs, mask, rng, false, flags);
      actions[i] = s.action;
      if (seat.kind == SeatAssignment::Kind::Learner) {
        StepRecord rec;
        rec.observation = std::move(obs);
        rec.mask = std::move(mask);
        rec.action = s.action;
        rec.concession_raw = s.concession_raw;
        rec.log_prob = s.log_prob;
        rec.value = s.value;
        per_seat[i].push_back(std::move(rec));
        recorded.push_back(i);
      }
    }
    env::StepResult res = e.step(actions);
    for (int i : recorded) {
      per_seat[i].back().reward = res.rewards[i].total;
      per_seat[i].back().done = res.done;
    }
  }

  env::EpisodeResult er = e.result();
  EpisodeOutput out;
  out.stats.agreed = er.outcome.agreed();
  out.stats.rounds = er.rounds_used;
  out.stats.mean_utility =
      std::accumulate(er.final_utilities.begin(), er.final_utilities.end(), 0.0) / N;
  std::vector<double> reservations;
  for (const auto& p : sc.profiles) reservations.push_back(p.reservation);
  out.stats.objective = rewards::system_objective(
      out.stats.agreed, er.final_utilities, reservations, er.rounds_used,
      sc.budgets.total(), env_cfg.objective_weights);

  for (int i = 0; i < N; ++i) {
    auto& seg = per_seat[i];
    if (seg.empty()) continue;
    std::vector<double> rws, vals;
    std::vector<std::uint8_t> dones;
    for (const auto& r : seg) {
      rws.push_back(r.reward);
      vals.push_back(r.value);
      dones.push_back(r.done);
    }
    auto [adv, ret] = compute_gae(rws, vals, dones, gamma, gae_lambda, 0.0);
    for (std::size_t t = 0; t < seg.size(); ++t) {
      seg[t].advantage = adv[t];
      seg[t].ret = ret[t];
    }
    for (auto& r : seg) out.steps.push_back(std::move(r));
  }
  return out;
}

}  // namespace

RolloutBuffer collect_rollouts(const hcn::HcnParams& params, const OpponentPool& pool,
                               const StageConfig& stage, const PadShape& pad,
                               const env::EnvConfig& env_cfg, int count,
                               std::uint64_t seed, int workers, double gamma,
                               double gae_lambda, const hcn::AblationFlags& flags) {
  if (count < 1) throw TrainError("collect_rollouts: count must be positive");
  RolloutBuffer buffer;
  int wave = std::max(1, workers);
  std::uint64_t episode_index = 0;
  while (static_cast<int>(buffer.steps.size()) < count) {
    std::vector<EpisodeOutput> outs(wave);
#ifdef _OPENMP
#pragma omp parallel for num_threads(wave) schedule(static)
#endif
    for (int w = 0; w < wave; ++w)
      outs[w] = run_episode(params, pool, stage, pad, env_cfg,
                            mix_seed(seed, episode_index + w), flags, gamma, gae_lambda);
    for (int w = 0; w < wave; ++w) {
      for (auto& s : outs[w].steps) buffer.steps.push_back(std::move(s));
      buffer.episodes.push_back(outs[w].stats);
      if (static_cast<int>(buffer.steps.size()) >= count) break;
    }
    episode_index += wave;
  }
  buffer.steps.resize(count);
  return buffer;
}

namespace {

struct SampleEval {
  double ratio = 0;
  double surrogate = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  bool clipped = false;
};

// Builds the per-sample PPO loss graph, backpropagates, and accumulates the
// gradient contribution (divided by batch size) into grads.
SampleEval sample_gradient(const hcn::HcnParams& params, const StepRecord& rec,
                           double norm_adv, const PpoConfig& cfg,
                           const hcn::AblationFlags& flags, std::vector<Tensor>& grads,
                           double inv_batch) {
  num::Graph g;
  auto pv = hcn::leaf_params(g, params);
  auto ev = hcn::evaluate_action(g, params, pv, rec.observation, rec.mask, rec.action,
                                 rec.concession_raw, flags);
  Var ratio = g.exp_op(g.sub(ev.log_prob, g.constant(rec.log_prob)));
  Var surr_raw = g.scale(ratio, norm_adv);
  Var surr_clip = g.scale(g.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), norm_adv);
  // gradient of min() follows the active branch
  Var surr = g.value(surr_raw).data[0] <= g.value(surr_clip).data[0] ? surr_raw : surr_clip;
  Var vdiff = g.sub(ev.value, g.constant(rec.ret));
  Var loss = g.add(g.add(g.scale(surr, -1.0), g.scale(g.mul(vdiff, vdiff), cfg.value_coef)),
                   g.scale(ev.entropy, -cfg.entropy_coef));
  g.backward(loss);
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const Tensor& gk = g.grad(pv[k]);
    for (std::size_t j = 0; j < gk.size(); ++j)
      grads[k].data[j] += gk.data[j] * inv_batch;
  }
  SampleEval s;
  s.ratio = g.value(ratio).data[0];
  s.surrogate = std::min(g.value(surr_raw).data[0], g.value(surr_clip).data[0]);
  s.policy_loss = -s.surrogate;
  s.value_loss = g.value(vdiff).data[0] * g.value(vdiff).data[0];
  s.entropy = g.value(ev.entropy).data[0];
  s.clipped = std::abs(s.ratio - 1.0) > cfg.clip;
  return s;
}

}  // namespace

UpdateStats ppo_update(const RolloutBuffer& buffer, hcn::HcnParams& params,
                       num::AdamState& opt, const PpoConfig& cfg, std::mt19937_64& rng,
                       int workers, const hcn::AblationFlags& flags) {
  cfg.validate();
  std::size_t n = buffer.steps.size();
  if (n == 0) throw TrainError("ppo_update: empty buffer");
  std::vector<Tensor> snapshot = params.t;
  UpdateStats stats;
  double sum_pl = 0, sum_vl = 0, sum_ent = 0;
  long long clip_count = 0, sample_count = 0;
  bool first_minibatch = true;

  try {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
        std::size_t stop = std::min(n, start + cfg.minibatch_size);
        std::size_t b = stop - start;

        double mean = 0, sq = 0;
        for (std::size_t k = start; k < stop; ++k) mean += buffer.steps[order[k]].advantage;
        mean /= b;
        for (std::size_t k = start; k < stop; ++k) {
          double d = buffer.steps[order[k]].advantage - mean;
          sq += d * d;
        }
        double sd = std::sqrt(sq / b);
        std::vector<double> norm_adv(b);
        for (std::size_t k = 0; k < b; ++k) {
          double centered = buffer.steps[order[start + k]].advantage - mean;
          norm_adv[k] = sd < 1e-8 ? centered : centered / sd;
        }

        std::vector<Tensor> grads;
        for (const auto& t : params.t) grads.push_back(Tensor::zeros(t.shape));
        std::vector<SampleEval> evals(b);
        double inv_b = 1.0 / static_cast<double>(b);

        int threads = std::max(1, workers);
        if (threads == 1) {
          for (std::size_t k = 0; k < b; ++k)
            evals[k] = sample_gradient(params, buffer.steps[order[start + k]], norm_adv[k],
                                       cfg, flags, grads, inv_b);
        } else {
          std::vector<std::vector<Tensor>> partial(threads);
#ifdef _OPENMP
#pragma omp parallel num_threads(threads)
          {
            int tid = omp_get_thread_num();
            auto& local = partial[tid];
            for (const auto& t : params.t) local.push_back(Tensor::zeros(t.shape));
#pragma omp for schedule(static)
            for (long long k = 0; k < static_cast<long long>(b); ++k)
              evals[k] = sample_gradient(params, buffer.steps[order[start + k]], norm_adv[k],
                                         cfg, flags, local, inv_b);
          }
#else
          for (auto& local : partial)
            for (const auto& t : params.t) local.push_back(Tensor::zeros(t.shape));
          for (std::size_t k = 0; k < b; ++k)
            evals[k] = sample_gradient(params, buffer.steps[order[start + k]], norm_adv[k],
                                       cfg, flags, partial[0], inv_b);
#endif
          // reduce in thread-id order for per-worker-count determinism
          for (const auto& local : partial)
            for (std::size_t t = 0; t < grads.size(); ++t)
              for (std::size_t j = 0; j < grads[t].size(); ++j)
                grads[t].data[j] += local[t].data[j];
        }

        if (first_minibatch) {
          double rsum = 0;
          for (const auto& ev : evals) rsum += ev.ratio;
          stats.mean_ratio = rsum / b;
          first_minibatch = false;
        }
        for (const auto& ev : evals) {
          sum_pl += ev.policy_loss;
          sum_vl += ev.value_loss;
          sum_ent += ev.entropy;
          if (ev.clipped) ++clip_count;
          ++sample_count;
        }

        double gn = num::global_norm(grads);
        if (gn > cfg.max_grad_norm && gn > 0)
          for (auto& t : grads)
            for (auto& x : t.data) x *= cfg.max_grad_norm / gn;
        auto ptrs = params.tensor_ptrs();
        opt.step(ptrs, grads);
      }
    }
  } catch (const num::NumericFault&) {
    params.t = std::move(snapshot);
    stats.fault = true;
    return stats;
  }

  stats.policy_loss = sum_pl / sample_count;
  stats.value_loss = sum_vl / sample_count;
  stats.entropy = sum_ent / sample_count;
  stats.clip_fraction = static_cast<double>(clip_count) / sample_count;
  return stats;
}

double buffer_surrogate(const RolloutBuffer& buffer, const hcn::HcnParams& params,
                        double clip, int workers, const hcn::AblationFlags& flags) {
  std::size_t n = buffer.steps.size();
  if (n == 0) throw TrainError("buffer_surrogate: empty buffer");
  // same advantage normalization as the update path, over the whole buffer
  double mean = 0, sq = 0;
  for (const auto& s : buffer.steps) mean += s.advantage;
  mean /= static_cast<double>(n);
  for (const auto& s : buffer.steps) {
    double d = s.advantage - mean;
    sq += d * d;
  }
  double sd = std::sqrt(sq / static_cast<double>(n));
  std::vector<double> vals(n, 0.0);
  int threads = std::max(1, workers);
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static)
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    const StepRecord& rec = buffer.steps[i];
    num::Graph g(false);
    auto pv = hcn::leaf_params(g, params);
    auto ev = hcn::evaluate_action(g, params, pv, rec.observation, rec.mask, rec.action,
                                   rec.concession_raw, flags);
    double ratio = std::exp(g.value(ev.log_prob).data[0] - rec.log_prob);
    double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    double centered = rec.advantage - mean;
    double adv = sd < 1e-8 ? centered : centered / sd;
    vals[i] = std::min(ratio * adv, clipped * adv);
  }
  double acc = 0;
  for (double v : vals) acc += v;
  return acc / static_cast<double>(n);
}

TrainResult run_training(const TrainOptions& opts) {
  opts.ppo.validate();
  if (opts.curriculum.stages.empty()) throw TrainError("curriculum has no stages");
  PadShape pad = pad_shape_of(opts.curriculum);

  TrainResult result{hcn::HcnParams::init(pad.num_agents, pad.num_issues, pad.num_values,
                                          opts.net, mix_seed(opts.seed, 1000)),
                     {}, 1, 0};
  num::AdamState opt(num::AdamConfig{opts.ppo.lr, 0.9, 0.999, 1e-8});
  OpponentPool pool(opts.pool);
  std::mt19937_64 update_rng(mix_seed(opts.seed, 2000));

  std::ofstream log_file;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    log_file.open(opts.out_dir + "/training_log.jsonl", std::ios::trunc);
    if (!log_file) throw TrainError("cannot open training log in " + opts.out_dir);
  }

  int stage = 0;
  std::vector<double> stage_history;  // per-iteration consensus, current stage
  std::vector<double> recent;         // for early stopping / best-window tracking
  double best_window = -1.0;
  std::vector<Tensor> best_params;
  int iteration = 0;

  while (result.env_steps < opts.total_steps) {
    ++iteration;
    RolloutBuffer buffer =
        collect_rollouts(result.params, pool, opts.curriculum.stages[stage], pad,
                         opts.env_cfg, opts.ppo.steps_per_iteration,
                         mix_seed(opts.seed, 3000 + iteration), opts.workers,
                         opts.ppo.gamma, opts.ppo.gae_lambda, opts.ablation);
    result.env_steps += static_cast<long long>(buffer.steps.size());

    double consensus = 0, mean_obj = 0;
    for (const auto& ep : buffer.episodes) {
      consensus += ep.agreed ? 1.0 : 0.0;
      mean_obj += ep.objective;
    }
    consensus /= buffer.episodes.size();
    mean_obj /= buffer.episodes.size();

    PpoConfig iter_ppo = opts.ppo;
    if (opts.ppo.entropy_coef_final >= 0.0) {
      double frac = std::min(1.0, static_cast<double>(result.env_steps) /
                                      static_cast<double>(opts.total_steps));
      iter_ppo.entropy_coef =
          opts.ppo.entropy_coef +
          frac * (opts.ppo.entropy_coef_final - opts.ppo.entropy_coef);
    }
    UpdateStats us = ppo_update(buffer, result.params, opt, iter_ppo, update_rng,
                                opts.workers, opts.ablation);
    pool.maybe_snapshot(result.params, iteration);

    IterationStats is;
    is.iteration = iteration;
    is.stage = stage + 1;
    is.consensus_rate = consensus;
    is.mean_objective = mean_obj;
    is.update = us;
    is.env_steps = result.env_steps;
    result.log.push_back(is);

    if (log_file) {
      nlohmann::ordered_json j;
      j["iteration"] = is.iteration;
      j["stage"] = is.stage;
      j["consensus_rate"] = is.consensus_rate;
      j["mean_objective"] = is.mean_objective;
      j["policy_loss"] = us.policy_loss;
      j["value_loss"] = us.value_loss;
      j["entropy"] = us.entropy;
      j["clip_fraction"] = us.clip_fraction;
      j["mean_ratio"] = us.mean_ratio;
      j["fault"] = us.fault;
      j["env_steps"] = is.env_steps;
      log_file << j.dump() << "\n";
      log_file.flush();
    }
    if (!opts.out_dir.empty() && opts.checkpoint_every > 0 &&
        iteration % opts.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "/checkpoint_%06d.ckpt", iteration);
      hcn::save(result.params, opts.out_dir + name);
    }

    stage_history.push_back(consensus);
    int next = curriculum_advance(stage_history, stage, opts.curriculum);
    if (next != stage) {
      stage = next;
      stage_history.clear();
    }

    recent.push_back(consensus);
    double window_mean = -1.0;
    if (static_cast<int>(recent.size()) >= opts.stop_window) {
      double acc = 0;
      for (std::size_t i = recent.size() - opts.stop_window; i < recent.size(); ++i)
        acc += recent[i];
      window_mean = acc / opts.stop_window;
    }
    if (opts.keep_best && window_mean > best_window) {
      best_window = window_mean;
      best_params = result.params.t;
    }
    if (opts.stop_consensus > 0 && window_mean >= opts.stop_consensus) break;
  }

  if (opts.keep_best && !best_params.empty()) result.params.t = best_params;
  result.final_stage = stage + 1;
  if (!opts.out_dir.empty()) hcn::save(result.params, opts.out_dir + "/final.ckpt");
  return result;
}

}  // namespace diplomat::training
