#pragma once
// Metrics, brute-force oracles, and sweep harnesses.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "diplomat/domain.hpp"
#include "diplomat/env.hpp"
#include "diplomat/hcn.hpp"
#include "diplomat/training.hpp"

namespace diplomat::evaluation {

struct OracleRefused : std::runtime_error {
  explicit OracleRefused(const std::string& msg) : std::runtime_error(msg) {}
};

// Normalized mean absolute pairwise difference; 0 for empty input or when no
// entry is strictly positive. Negative entries are a domain error.
double gini(const std::vector<double>& utilities);

struct ParetoFront {
  std::vector<domain::Deal> deals;
  std::vector<std::vector<double>> utilities;  // per deal, per agent
};

// true iff a weakly dominates b with at least one strict improvement
bool dominates(const std::vector<double>& a, const std::vector<double>& b);

// Exact front by pairwise dominance over the enumerated deal space.
ParetoFront pareto_front(const domain::Scenario& sc);

// Welfare-optimal deal (max summed utility) via per-issue greedy composition;
// valid because utilities are additive over issues.
domain::Deal welfare_optimal_deal(const domain::Scenario& sc);

// One negotiation seat: either the trained policy or a scripted baseline.
struct Seat {
  enum class Kind { Policy, Random, Conceder, AlternatingOffers };
  Kind kind = Kind::Random;
  const hcn::HcnParams* params = nullptr;  // Policy
  hcn::AblationFlags flags;
  double beta_c = 1.0;                     // Conceder
  bool deterministic = false;              // Policy: argmax actions
};

// Runs one episode with the given seats (cycled when fewer than N).
env::EpisodeResult run_episode(const domain::Scenario& sc, const std::vector<Seat>& seats,
                               const env::EnvConfig& env_cfg, std::uint64_t seed);

struct MetricsSummary {
  double consensus_rate = 0;
  double mean_rounds = 0;      // failures count the full budget
  double social_welfare = 0;   // mean over episodes of mean normalized utility
  double mean_gini = 0;
  double pareto_rate = 0;      // over oracle-checkable agreements
  double mean_objective = 0;
  int episodes = 0;
  std::vector<std::uint64_t> seeds;
};

struct EpisodeRow {
  int episode_id = 0;
  std::uint64_t seed = 0;
  int num_agents = 0;
  int num_issues = 0;
  bool agreed = false;
  int rounds = 0;
  std::vector<double> utilities;
  double objective = 0;
  bool pareto_checked = false;
  bool pareto_optimal = false;
};

struct EvaluationResult {
  MetricsSummary summary;
  std::vector<EpisodeRow> rows;
};

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 0;
  int workers = 1;
  env::EnvConfig env_cfg;
  std::uint64_t pareto_limit = 100'000;  // deal-space cutoff for the oracle check
};

// Deterministic per (seed, generator, seats); episode order fixes aggregation.
EvaluationResult evaluate(const std::vector<Seat>& seats,
                          const domain::GeneratorConfig& generator, const EvalOptions& opts);

// Per-episode CSV, format "diplomat-episodes/1"; variable-width utility
// columns are declared in the header.
void write_episode_csv(const EvaluationResult& result, const std::string& path);
// Summary JSON, format "diplomat-summary/1".
void write_summary_json(const MetricsSummary& summary, const std::string& path);
// Recomputes a summary from a written CSV (self-consistency checks).
MetricsSummary summary_from_csv(const std::string& path);

// Table-3-style variants. Known flags: "full", "no-hierarchy", "no-attention",
// "no-shaping", "no-pnp". Each trains from scratch with the flag applied and
// evaluates self-play on the generator.
struct AblationOutcome {
  std::string flag;
  MetricsSummary summary;
};
std::vector<AblationOutcome> ablate(const training::TrainOptions& base,
                                    const domain::GeneratorConfig& generator,
                                    const std::vector<std::string>& flags,
                                    const EvalOptions& eval_opts);

// Trains and evaluates per agent count; each summary is paired with its N.
struct ScalePoint {
  int num_agents = 0;
  MetricsSummary summary;
};
std::vector<ScalePoint> scalability_sweep(const training::TrainOptions& base,
                                          const std::vector<int>& agent_counts,
                                          const EvalOptions& eval_opts);

}  // namespace diplomat::evaluation
