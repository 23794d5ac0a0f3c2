// Command-line entry point: train / evaluate / simulate / oracle / ablate.
// Exit codes: 0 ok, 2 config error, 3 numeric fault, 4 oracle refused.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "diplomat/config.hpp"
#include "diplomat/evaluation.hpp"
#include "diplomat/training.hpp"

namespace fs = std::filesystem;
using namespace diplomat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitOracle = 4;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string resolve_out(const std::string& cli_out) {
  if (const char* env = std::getenv("DIPLOMAT_OUT"); env && *env) return env;
  return cli_out;
}

// "random", "conceder", "conceder:BETA", "alternating", "policy:PATH".
// Policy params are owned by `storage` so seats can hold stable pointers.
evaluation::Seat parse_agent_spec(const std::string& spec,
                                  std::vector<std::unique_ptr<hcn::HcnParams>>& storage) {
  evaluation::Seat seat;
  std::string head = spec, arg;
  if (auto colon = spec.find(':'); colon != std::string::npos) {
    head = spec.substr(0, colon);
    arg = spec.substr(colon + 1);
  }
  if (head == "random") {
    seat.kind = evaluation::Seat::Kind::Random;
  } else if (head == "conceder") {
    seat.kind = evaluation::Seat::Kind::Conceder;
    seat.beta_c = arg.empty() ? 1.0 : std::stod(arg);
  } else if (head == "alternating") {
    seat.kind = evaluation::Seat::Kind::AlternatingOffers;
  } else if (head == "policy") {
    if (arg.empty()) throw CliError("agent spec 'policy' needs a checkpoint path");
    storage.push_back(std::make_unique<hcn::HcnParams>(hcn::load(arg)));
    seat.kind = evaluation::Seat::Kind::Policy;
    seat.params = storage.back().get();
  } else {
    throw CliError("unknown agent spec '" + spec + "'");
  }
  return seat;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

nlohmann::ordered_json summary_json(const evaluation::MetricsSummary& s) {
  nlohmann::ordered_json j;
  j["episodes"] = s.episodes;
  j["consensus_rate"] = s.consensus_rate;
  j["mean_rounds"] = s.mean_rounds;
  j["social_welfare"] = s.social_welfare;
  j["mean_gini"] = s.mean_gini;
  j["pareto_rate"] = s.pareto_rate;
  j["mean_objective"] = s.mean_objective;
  return j;
}

// The deployment distribution: last curriculum stage, randomization stripped.
domain::GeneratorConfig eval_generator(const config::RunConfig& cfg) {
  if (cfg.train.curriculum.stages.empty()) throw CliError("config has no curriculum stages");
  return cfg.train.curriculum.stages.back().generator;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<int> workers, const std::string& out) {
  config::RunConfig cfg = config::load_run_config(config_path);
  if (seed) cfg.train.seed = *seed;
  if (workers) cfg.train.workers = *workers;
  std::string out_dir = resolve_out(out);
  if (!out_dir.empty()) cfg.train.out_dir = out_dir;
  if (cfg.train.out_dir.empty()) cfg.train.out_dir = "out";
  training::TrainResult res = training::run_training(cfg.train);
  nlohmann::ordered_json j;
  j["final_stage"] = res.final_stage;
  j["env_steps"] = res.env_steps;
  j["iterations"] = res.log.size();
  j["out"] = cfg.train.out_dir;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint,
                 const std::string& baseline, std::optional<std::uint64_t> seed,
                 std::optional<int> workers, const std::string& out) {
  config::RunConfig cfg = config::load_run_config(config_path);
  if (seed) cfg.eval.seed = *seed;
  if (workers) cfg.eval.workers = *workers;
  std::string out_dir = resolve_out(out);
  if (out_dir.empty()) out_dir = "out";

  hcn::HcnParams params = hcn::load(checkpoint);
  evaluation::Seat policy;
  policy.kind = evaluation::Seat::Kind::Policy;
  policy.params = &params;
  std::vector<evaluation::Seat> seats{policy};
  std::vector<std::unique_ptr<hcn::HcnParams>> storage;
  if (!baseline.empty()) seats.push_back(parse_agent_spec(baseline, storage));

  evaluation::EvaluationResult res = evaluation::evaluate(seats, eval_generator(cfg), cfg.eval);
  fs::create_directories(out_dir);
  evaluation::write_episode_csv(res, out_dir + "/episodes.csv");
  evaluation::write_summary_json(res.summary, out_dir + "/summary.json");
  std::cout << summary_json(res.summary).dump() << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, const std::vector<std::string>& agent_specs,
                 std::uint64_t seed) {
  domain::Scenario sc = domain::load_scenario(scenario_path);
  std::vector<std::unique_ptr<hcn::HcnParams>> storage;
  std::vector<evaluation::Seat> seats;
  for (const auto& spec : agent_specs) seats.push_back(parse_agent_spec(spec, storage));
  if (seats.empty()) throw CliError("simulate needs at least one --agents entry");
  env::EpisodeResult res = evaluation::run_episode(sc, seats, {}, seed);
  for (const auto& lm : res.transcript) std::cout << protocol::transcript_line(lm).dump() << "\n";
  std::cout << protocol::outcome_line(res.outcome).dump() << "\n";
  return kExitOk;
}

int cmd_oracle(const std::string& scenario_path, std::size_t member_limit) {
  domain::Scenario sc = domain::load_scenario(scenario_path);
  std::cout << sc.deal_space_size() << " deals\n";
  domain::Deal best = evaluation::welfare_optimal_deal(sc);
  double welfare = 0;
  for (int i = 0; i < sc.num_agents; ++i) welfare += domain::utility(sc, i, best);
  std::cout << "welfare-optimal deal: " << nlohmann::json(best.values).dump()
            << " welfare " << welfare << "\n";
  evaluation::ParetoFront front = evaluation::pareto_front(sc);
  std::cout << "pareto front: " << front.deals.size() << " deals\n";
  for (std::size_t i = 0; i < front.deals.size() && i < member_limit; ++i)
    std::cout << "  " << nlohmann::json(front.deals[i].values).dump() << " utilities "
              << nlohmann::json(front.utilities[i]).dump() << "\n";
  if (front.deals.size() > member_limit)
    std::cout << "  ... " << front.deals.size() - member_limit << " more\n";
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& flags_list,
               std::optional<std::uint64_t> seed, std::optional<int> workers,
               const std::string& out) {
  config::RunConfig cfg = config::load_run_config(config_path);
  if (seed) {
    cfg.train.seed = *seed;
    cfg.eval.seed = *seed;
  }
  if (workers) {
    cfg.train.workers = *workers;
    cfg.eval.workers = *workers;
  }
  std::string out_dir = resolve_out(out);
  if (!out_dir.empty()) cfg.train.out_dir = out_dir;
  std::vector<std::string> flags = split_list(flags_list);
  if (flags.empty()) throw CliError("--flags needs a comma-separated list");
  auto outcomes = evaluation::ablate(cfg.train, eval_generator(cfg), flags, cfg.eval);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& o : outcomes) {
    nlohmann::ordered_json row;
    row["flag"] = o.flag;
    row["summary"] = summary_json(o.summary);
    j.push_back(row);
  }
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diplomat: multi-agent negotiation arena"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string config_path, out, checkpoint, baseline, scenario_path, flags_list;
  std::vector<std::string> agent_specs;
  std::uint64_t sim_seed = 0;
  std::size_t member_limit = 64;

  CLI::App* train = app.add_subcommand("train", "run the training curriculum");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--seed", seed, "override config seed");
  train->add_option("--workers", workers, "worker threads; 1 = reproducibility mode");
  train->add_option("--out", out, "output directory");

  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint; emits CSV + summary");
  evaluate->add_option("--config", config_path, "run config JSON")->required();
  evaluate->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  evaluate->add_option("--baseline", baseline,
                       "opponent spec: random|conceder[:BETA]|alternating|policy:PATH");
  evaluate->add_option("--seed", seed, "override config seed");
  evaluate->add_option("--workers", workers, "worker threads; 1 = reproducibility mode");
  evaluate->add_option("--out", out, "output directory");

  CLI::App* simulate = app.add_subcommand("simulate", "one verbose episode to stdout");
  simulate->add_option("--scenario", scenario_path, "scenario JSON")->required();
  simulate->add_option("--agents", agent_specs, "agent specs, cycled over seats")->required();
  simulate->add_option("--seed", sim_seed, "episode seed");

  CLI::App* oracle = app.add_subcommand("oracle", "brute-force facts about a scenario");
  oracle->add_option("--scenario", scenario_path, "scenario JSON")->required();
  oracle->add_option("--members", member_limit, "pareto members to print");

  CLI::App* ablate = app.add_subcommand("ablate", "train + evaluate ablation variants");
  ablate->add_option("--config", config_path, "run config JSON")->required();
  ablate->add_option("--flags", flags_list,
                     "comma list: full,no-hierarchy,no-attention,no-shaping,no-pnp")
      ->required();
  ablate->add_option("--seed", seed, "override config seed");
  ablate->add_option("--workers", workers, "worker threads");
  ablate->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(config_path, seed, workers, out);
    if (*evaluate) return cmd_evaluate(config_path, checkpoint, baseline, seed, workers, out);
    if (*simulate) return cmd_simulate(scenario_path, agent_specs, sim_seed);
    if (*oracle) return cmd_oracle(scenario_path, member_limit);
    if (*ablate) return cmd_ablate(config_path, flags_list, seed, workers, out);
  } catch (const num::NumericFault& e) {
    std::cerr << "numeric fault: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const evaluation::OracleRefused& e) {
    std::cerr << "oracle refused: " << e.what() << "\n";
    return kExitOracle;
  } catch (const domain::EnumerationRefused& e) {
    std::cerr << "oracle refused: " << e.what() << "\n";
    return kExitOracle;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
