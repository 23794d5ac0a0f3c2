#pragma once
// PPO with GAE, the staged curriculum, and a snapshot opponent pool for
// self-play. One shared policy plays every learner seat.

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "diplomat/baselines.hpp"
#include "diplomat/env.hpp"
#include "diplomat/hcn.hpp"
#include "diplomat/numerics.hpp"

namespace diplomat::training {

struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int epochs = 4;
  int minibatch_size = 64;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  // When >= 0, entropy_coef is interpolated linearly down to this value over
  // the run (explore early, commit late).
  double entropy_coef_final = -1.0;
  double lr = 3e-4;
  double max_grad_norm = 0.5;
  int steps_per_iteration = 2048;

  void validate() const;  // clip in (0,1), gamma in [0,1), gae_lambda in [0,1]
};

// One learner-seat step. Observations are stored pre-padded to the network
// shape; advantage/return are filled by GAE before any update touches them.
struct StepRecord {
  env::Observation observation;
  std::vector<std::uint8_t> mask;
  env::AgentAction action;
  double concession_raw = 0;
  double log_prob = 0;
  double value = 0;
  double reward = 0;
  bool done = false;
  double advantage = 0;
  double ret = 0;
};

struct EpisodeStats {
  bool agreed = false;
  int rounds = 0;
  double mean_utility = 0;
  double objective = 0;
};

struct RolloutBuffer {
  std::vector<StepRecord> steps;  // grouped by (episode, seat), time-ordered
  std::vector<EpisodeStats> episodes;
};

// Standard GAE recursion, backward per segment. A done flag cuts bootstrap to
// 0; a truncated tail (final done = false) bootstraps from last_value.
std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    const std::vector<std::uint8_t>& dones, double gamma, double gae_lambda,
    double last_value = 0.0);

struct PoolConfig {
  int capacity = 10;
  double p_hist = 0.3;    // chance a non-learner seat faces a snapshot
  int snapshot_every = 10;  // iterations between snapshots
};

class OpponentPool {
 public:
  explicit OpponentPool(PoolConfig cfg) : cfg_(cfg) {}

  void maybe_snapshot(const hcn::HcnParams& params, int iteration);
  // Uniform over snapshots; falls back to `current` while empty.
  const hcn::HcnParams& sample(const hcn::HcnParams& current, std::mt19937_64& rng) const;

  const PoolConfig& config() const { return cfg_; }
  int size() const { return static_cast<int>(snapshots_.size()); }

 private:
  PoolConfig cfg_;
  std::deque<hcn::HcnParams> snapshots_;
};

struct StageConfig {
  domain::GeneratorConfig generator;
  // Stage-5 style domain randomization: per-episode agent/issue counts and
  // round budgets drawn from the ranges below.
  bool randomized = false;
  int agents_min = 2, agents_max = 6;
  int issues_min = 1, issues_max = 4;
  // Fraction of non-learner seats played by scripted exploiters.
  double exploiter_fraction = 0.0;
};

struct CurriculumConfig {
  std::vector<StageConfig> stages;
  int window = 20;          // iterations in the promotion window
  double threshold = 0.85;  // consensus-rate mean required to advance
};

CurriculumConfig default_curriculum();

// Rolling-window promotion; the last stage is terminal. `stage` is 0-based.
int curriculum_advance(const std::vector<double>& consensus_history, int stage,
                       const CurriculumConfig& cfg);

domain::Scenario stage_scenario(const StageConfig& stage, std::uint64_t seed);

// Network shape able to host every stage of the curriculum.
struct PadShape {
  int num_agents = 2;
  int num_issues = 1;
  std::vector<int> num_values{5};
};
PadShape pad_shape_of(const CurriculumConfig& cfg);

// Runs whole episodes until at least `count` learner-steps exist, then trims
// to exactly `count`. Seat 0 always plays the learner; other seats face pool
// snapshots with probability p_hist and scripted exploiters per the stage.
// Bit-identical for a fixed seed regardless of worker count.
RolloutBuffer collect_rollouts(const hcn::HcnParams& params, const OpponentPool& pool,
                               const StageConfig& stage, const PadShape& pad,
                               const env::EnvConfig& env_cfg, int count,
                               std::uint64_t seed, int workers, double gamma = 0.99,
                               double gae_lambda = 0.95,
                               const hcn::AblationFlags& flags = {});

struct UpdateStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double mean_ratio = 0;  // first epoch, first minibatch, pre-update
  bool fault = false;     // numeric fault: params were rolled back
};

UpdateStats ppo_update(const RolloutBuffer& buffer, hcn::HcnParams& params,
                       num::AdamState& opt, const PpoConfig& cfg, std::mt19937_64& rng,
                       int workers, const hcn::AblationFlags& flags = {});

// Mean over the buffer of min(r*A, clip(r)*A) under `params`.
double buffer_surrogate(const RolloutBuffer& buffer, const hcn::HcnParams& params,
                        double clip, int workers, const hcn::AblationFlags& flags = {});

struct TrainOptions {
  PpoConfig ppo;
  PoolConfig pool;
  CurriculumConfig curriculum = default_curriculum();
  hcn::HcnConfig net;
  env::EnvConfig env_cfg;
  hcn::AblationFlags ablation;
  std::uint64_t seed = 0;
  int workers = 1;
  long long total_steps = 200'000;
  std::string out_dir;       // when set: training_log.jsonl + checkpoints
  int checkpoint_every = 0;  // iterations; 0 = final checkpoint only
  double stop_consensus = -1.0;  // early stop threshold over stop_window
  int stop_window = 5;
  // Return the parameters from the best stop_window training-consensus window
  // instead of the last iterate (self-play consensus oscillates).
  bool keep_best = false;
};

struct IterationStats {
  int iteration = 0;
  int stage = 1;  // 1-based for reporting
  double consensus_rate = 0;
  double mean_objective = 0;
  UpdateStats update;
  long long env_steps = 0;
};

struct TrainResult {
  hcn::HcnParams params;
  std::vector<IterationStats> log;
  int final_stage = 1;
  long long env_steps = 0;
};

TrainResult run_training(const TrainOptions& opts);

}  // namespace diplomat::training
