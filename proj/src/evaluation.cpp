#include "diplomat/evaluation.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "diplomat/baselines.hpp"

namespace diplomat::evaluation {

double gini(const std::vector<double>& utilities) {
  if (utilities.empty()) return 0.0;
  double sum = 0;
  for (double u : utilities) {
    if (u < 0) throw std::domain_error("gini: negative utility");
    sum += u;
  }
  if (sum <= 0) return 0.0;
  std::size_t n = utilities.size();
  double diff = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) diff += std::abs(utilities[i] - utilities[j]);
  double mean = sum / n;
  return diff / (2.0 * n * n * mean);
}

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

ParetoFront pareto_front(const domain::Scenario& sc) {
  std::vector<domain::Deal> deals;
  try {
    deals = domain::enumerate_deals(sc);
  } catch (const domain::EnumerationRefused& e) {
    throw OracleRefused(e.what());
  }
  std::vector<std::vector<double>> utils(deals.size());
  for (std::size_t d = 0; d < deals.size(); ++d) {
    utils[d].resize(sc.num_agents);
    for (int i = 0; i < sc.num_agents; ++i) utils[d][i] = domain::utility(sc, i, deals[d]);
  }
  ParetoFront front;
  for (std::size_t d = 0; d < deals.size(); ++d) {
    bool dominated = false;
    for (std::size_t e = 0; e < deals.size() && !dominated; ++e)
      if (e != d && dominates(utils[e], utils[d])) dominated = true;
    if (!dominated) {
      front.deals.push_back(deals[d]);
      front.utilities.push_back(utils[d]);
    }
  }
  return front;
}

domain::Deal welfare_optimal_deal(const domain::Scenario& sc) {
  domain::Deal best;
  for (int m = 0; m < sc.num_issues(); ++m) {
    int best_k = 0;
    double best_v = -1;
    for (int k = 0; k < sc.issues[m].num_values; ++k) {
      double v = 0;
      for (const auto& p : sc.profiles) v += p.weights[m] * p.valuations[m][k];
      if (v > best_v) {
        best_v = v;
        best_k = k;
      }
    }
    best.values.push_back(best_k);
  }
  return best;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

env::EpisodeResult run_episode(const domain::Scenario& sc, const std::vector<Seat>& seats,
                               const env::EnvConfig& env_cfg, std::uint64_t seed) {
  if (seats.empty()) throw std::invalid_argument("run_episode: no seats given");
  std::mt19937_64 rng(seed);
  env::Env e(sc, env_cfg, mix_seed(seed, 2));
  int N = sc.num_agents;
  std::vector<baselines::AlternatingOffersState> alt_mem(N);

  while (!e.done()) {
    std::vector<env::AgentAction> actions(N);
    for (int i = 0; i < N; ++i) {
      const Seat& seat = seats[i % seats.size()];
      switch (seat.kind) {
        case Seat::Kind::Policy: {
          if (!seat.params) throw std::invalid_argument("run_episode: policy seat without params");
          env::Observation obs = env::pad_observation(
              e.observations()[i], sc, seat.params->num_agents, seat.params->num_values);
          actions[i] = hcn::sample_action(*seat.params, obs, e.illegal_tag_mask(i), rng,
                                          seat.deterministic, seat.flags)
                           .action;
          break;
        }
        case Seat::Kind::Conceder:
          actions[i] = baselines::conceder_policy(e.state(), sc, i, seat.beta_c,
                                                  env_cfg.protocol_opts);
          break;
        case Seat::Kind::AlternatingOffers:
          actions[i] = baselines::alternating_offers_policy(alt_mem[i], e.state(), sc, i,
                                                            env_cfg.protocol_opts);
          break;
        case Seat::Kind::Random:
          actions[i] = baselines::random_policy(e.state(), sc, i, rng, env_cfg.protocol_opts);
          break;
      }
    }
    e.step(actions);
  }
  return e.result();
}

namespace {

MetricsSummary summarize(const std::vector<EpisodeRow>& rows) {
  MetricsSummary s;
  s.episodes = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  int pareto_den = 0, pareto_num = 0;
  for (const auto& r : rows) {
    s.seeds.push_back(r.seed);
    s.consensus_rate += r.agreed ? 1.0 : 0.0;
    s.mean_rounds += r.rounds;
    s.social_welfare +=
        std::accumulate(r.utilities.begin(), r.utilities.end(), 0.0) / r.utilities.size();
    s.mean_gini += gini(r.utilities);
    s.mean_objective += r.objective;
    if (r.pareto_checked) {
      ++pareto_den;
      if (r.pareto_optimal) ++pareto_num;
    }
  }
  s.consensus_rate /= s.episodes;
  s.mean_rounds /= s.episodes;
  s.social_welfare /= s.episodes;
  s.mean_gini /= s.episodes;
  s.mean_objective /= s.episodes;
  s.pareto_rate = pareto_den ? static_cast<double>(pareto_num) / pareto_den : 0.0;
  return s;
}

}  // namespace

EvaluationResult evaluate(const std::vector<Seat>& seats,
                          const domain::GeneratorConfig& generator, const EvalOptions& opts) {
  if (opts.episodes < 0) throw std::invalid_argument("evaluate: negative episode count");
  std::vector<EpisodeRow> rows(opts.episodes);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, opts.workers))
#endif
  for (int ep = 0; ep < opts.episodes; ++ep) {
    std::uint64_t ep_seed = mix_seed(opts.seed, static_cast<std::uint64_t>(ep));
    domain::Scenario sc = domain::random_scenario(generator, mix_seed(ep_seed, 1));
    env::EpisodeResult er = run_episode(sc, seats, opts.env_cfg, ep_seed);

    EpisodeRow row;
    row.episode_id = ep;
    row.seed = ep_seed;
    row.num_agents = sc.num_agents;
    row.num_issues = sc.num_issues();
    row.agreed = er.outcome.agreed();
    row.rounds = row.agreed ? er.rounds_used : sc.budgets.total();
    row.utilities = er.final_utilities;
    std::vector<double> reservations;
    for (const auto& p : sc.profiles) reservations.push_back(p.reservation);
    row.objective =
        rewards::system_objective(row.agreed, er.final_utilities, reservations,
                                  er.rounds_used, sc.budgets.total(),
                                  opts.env_cfg.objective_weights);
    if (row.agreed && sc.deal_space_size() <= opts.pareto_limit) {
      try {
        ParetoFront front = pareto_front(sc);
        row.pareto_checked = true;
        row.pareto_optimal = true;
        for (const auto& u : front.utilities)
          if (dominates(u, row.utilities)) row.pareto_optimal = false;
      } catch (const OracleRefused&) {
        row.pareto_checked = false;
      }
    }
    rows[ep] = std::move(row);
  }
  EvaluationResult out;
  out.rows = std::move(rows);
  out.summary = summarize(out.rows);
  return out;
}

void write_episode_csv(const EvaluationResult& result, const std::string& path) {
  std::size_t max_u = 0;
  for (const auto& r : result.rows) max_u = std::max(max_u, r.utilities.size());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_episode_csv: cannot open " + path);
  os << "# diplomat-episodes/1\n";
  os << "episode_id,seed,N,M,outcome,rounds,J,gini,pareto_checked,pareto_optimal";
  for (std::size_t k = 0; k < max_u; ++k) os << ",u" << k;
  os << "\n";
  for (const auto& r : result.rows) {
    os << r.episode_id << ',' << r.seed << ',' << r.num_agents << ',' << r.num_issues << ','
       << (r.agreed ? "agreement" : "failure") << ',' << r.rounds << ','
       << fmt_double(r.objective) << ',' << fmt_double(gini(r.utilities)) << ','
       << (r.pareto_checked ? 1 : 0) << ',' << (r.pareto_optimal ? 1 : 0);
    for (std::size_t k = 0; k < max_u; ++k)
      os << ',' << (k < r.utilities.size() ? fmt_double(r.utilities[k]) : "");
    os << "\n";
  }
}

void write_summary_json(const MetricsSummary& summary, const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "diplomat-summary/1";
  j["episodes"] = summary.episodes;
  j["consensus_rate"] = summary.consensus_rate;
  j["mean_rounds"] = summary.mean_rounds;
  j["social_welfare"] = summary.social_welfare;
  j["mean_gini"] = summary.mean_gini;
  j["pareto_rate"] = summary.pareto_rate;
  j["mean_objective"] = summary.mean_objective;
  j["seeds"] = summary.seeds;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_summary_json: cannot open " + path);
  os << j.dump(2) << "\n";
}

MetricsSummary summary_from_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("summary_from_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "# diplomat-episodes/1")
    throw std::runtime_error("summary_from_csv: unrecognized format line");
  if (!std::getline(is, line)) throw std::runtime_error("summary_from_csv: missing header");

  std::vector<EpisodeRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 10) throw std::runtime_error("summary_from_csv: short row");
    EpisodeRow r;
    r.episode_id = std::stoi(cells[0]);
    r.seed = std::stoull(cells[1]);
    r.num_agents = std::stoi(cells[2]);
    r.num_issues = std::stoi(cells[3]);
    r.agreed = cells[4] == "agreement";
    r.rounds = std::stoi(cells[5]);
    r.objective = std::stod(cells[6]);
    r.pareto_checked = cells[8] == "1";
    r.pareto_optimal = cells[9] == "1";
    for (std::size_t k = 10; k < cells.size(); ++k)
      if (!cells[k].empty()) r.utilities.push_back(std::stod(cells[k]));
    if (static_cast<int>(r.utilities.size()) != r.num_agents)
      throw std::runtime_error("summary_from_csv: utility count disagrees with N");
    rows.push_back(std::move(r));
  }
  return summarize(rows);
}

std::vector<AblationOutcome> ablate(const training::TrainOptions& base,
                                    const domain::GeneratorConfig& generator,
                                    const std::vector<std::string>& flags,
                                    const EvalOptions& eval_opts) {
  std::vector<AblationOutcome> out;
  for (const std::string& flag : flags) {
    training::TrainOptions opts = base;
    EvalOptions ev = eval_opts;
    if (!opts.out_dir.empty()) opts.out_dir += "/" + flag;
    if (flag == "full") {
    } else if (flag == "no-hierarchy") {
      opts.ablation.no_hierarchy = true;
    } else if (flag == "no-attention") {
      opts.ablation.no_attention = true;
    } else if (flag == "no-shaping") {
      opts.env_cfg.reward_weights.process = 0;
      opts.env_cfg.reward_weights.social = 0;
      opts.env_cfg.reward_weights.intrinsic = 0;
    } else if (flag == "no-pnp") {
      opts.env_cfg.protocol_opts.phase_free = true;
      ev.env_cfg.protocol_opts.phase_free = true;
    } else {
      throw training::TrainError("ablate: unknown variant '" + flag + "'");
    }
    training::TrainResult trained = training::run_training(opts);
    Seat seat;
    seat.kind = Seat::Kind::Policy;
    seat.params = &trained.params;
    seat.flags = opts.ablation;
    ev.workers = eval_opts.workers;
    AblationOutcome o;
    o.flag = flag;
    o.summary = evaluate({seat}, generator, ev).summary;
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<ScalePoint> scalability_sweep(const training::TrainOptions& base,
                                          const std::vector<int>& agent_counts,
                                          const EvalOptions& eval_opts) {
  std::vector<ScalePoint> out;
  for (int n : agent_counts) {
    if (n < 2) throw std::invalid_argument("scalability_sweep: need at least 2 agents");
    training::TrainOptions opts = base;
    if (opts.curriculum.stages.empty())
      throw training::TrainError("scalability_sweep: empty curriculum");
    training::StageConfig stage = opts.curriculum.stages.front();
    stage.randomized = false;
    stage.generator.num_agents = n;
    opts.curriculum.stages = {stage};
    if (!opts.out_dir.empty()) opts.out_dir += "/n" + std::to_string(n);
    training::TrainResult trained = training::run_training(opts);

    domain::GeneratorConfig gen = stage.generator;
    Seat seat;
    seat.kind = Seat::Kind::Policy;
    seat.params = &trained.params;
    seat.flags = opts.ablation;
    ScalePoint p;
    p.num_agents = n;
    p.summary = evaluate({seat}, gen, eval_opts).summary;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace diplomat::evaluation
