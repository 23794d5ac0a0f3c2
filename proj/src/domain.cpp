#include "diplomat/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace diplomat::domain {

Issue Issue::evenly_spaced(int id, int num_values) {
  Issue is;
  is.id = id;
  is.num_values = num_values;
  is.value_grid.resize(num_values);
  for (int k = 0; k < num_values; ++k)
    is.value_grid[k] = static_cast<double>(k) / (num_values - 1);
  is.validate();
  return is;
}

void Issue::validate() const {
  if (num_values < 2 || num_values > 64)
    throw ScenarioError("issue " + std::to_string(id) + ": num_values must be in [2,64]");
  if (static_cast<int>(value_grid.size()) != num_values)
    throw ScenarioError("issue " + std::to_string(id) + ": grid length mismatch");
  if (value_grid.front() != 0.0 || value_grid.back() != 1.0)
    throw ScenarioError("issue " + std::to_string(id) + ": grid must span [0,1]");
  for (std::size_t k = 1; k < value_grid.size(); ++k)
    if (value_grid[k] <= value_grid[k - 1])
      throw ScenarioError("issue " + std::to_string(id) + ": grid not strictly increasing");
}

void PreferenceProfile::validate(const std::vector<Issue>& issues) const {
  if (weights.size() != issues.size())
    throw ScenarioError("profile " + std::to_string(agent_id) + ": weight count mismatch");
  double sum = 0;
  for (double w : weights) {
    if (w < 0) throw ScenarioError("profile " + std::to_string(agent_id) + ": negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ScenarioError("profile " + std::to_string(agent_id) + ": weights sum to " +
                        std::to_string(sum));
  if (valuations.size() != issues.size())
    throw ScenarioError("profile " + std::to_string(agent_id) + ": valuation count mismatch");
  for (std::size_t m = 0; m < issues.size(); ++m) {
    if (static_cast<int>(valuations[m].size()) != issues[m].num_values)
      throw ScenarioError("profile " + std::to_string(agent_id) + ": valuation length mismatch");
    for (double v : valuations[m])
      if (v < 0.0 || v > 1.0)
        throw ScenarioError("profile " + std::to_string(agent_id) + ": valuation outside [0,1]");
  }
  if (reservation >= 1.0)
    throw ScenarioError("profile " + std::to_string(agent_id) + ": reservation must be < 1");
}

int RoundBudgets::total() const {
  int t = 0;
  for (int r : rounds) t += r;
  return t;
}

void RoundBudgets::validate() const {
  for (int r : rounds)
    if (r < 0) throw ScenarioError("negative phase budget");
  if (total() <= 0) throw ScenarioError("total round budget must be positive");
}

void Scenario::validate() const {
  if (num_agents < 2 || num_agents > 50)
    throw ScenarioError("num_agents must be in [2,50]");
  if (issues.empty()) throw ScenarioError("at least one issue required");
  for (const auto& is : issues) is.validate();
  if (static_cast<int>(profiles.size()) != num_agents)
    throw ScenarioError("exactly one profile per agent required");
  for (int i = 0; i < num_agents; ++i) {
    if (profiles[i].agent_id != i)
      throw ScenarioError("profiles must be ordered by agent id");
    profiles[i].validate(issues);
  }
  budgets.validate();
}

std::uint64_t Scenario::deal_space_size() const {
  std::uint64_t n = 1;
  for (const auto& is : issues) {
    if (n > std::numeric_limits<std::uint64_t>::max() / is.num_values)
      return std::numeric_limits<std::uint64_t>::max();
    n *= static_cast<std::uint64_t>(is.num_values);
  }
  return n;
}

bool Scenario::deal_valid(const Deal& d) const {
  if (d.values.size() != issues.size()) return false;
  for (std::size_t m = 0; m < issues.size(); ++m)
    if (d.values[m] < 0 || d.values[m] >= issues[m].num_values) return false;
  return true;
}

double utility(const PreferenceProfile& profile, const std::vector<Issue>& issues,
               const Deal& deal) {
  if (deal.values.size() != issues.size())
    throw InvalidDeal("deal has " + std::to_string(deal.values.size()) + " values for " +
                      std::to_string(issues.size()) + " issues");
  double u = 0;
  for (std::size_t m = 0; m < issues.size(); ++m) {
    int k = deal.values[m];
    if (k < 0 || k >= issues[m].num_values)
      throw InvalidDeal("deal index " + std::to_string(k) + " out of range on issue " +
                        std::to_string(m));
    u += profile.weights[m] * profile.valuations[m][k];
  }
  return u;
}

double utility(const Scenario& sc, int agent, const Deal& deal) {
  return utility(sc.profiles.at(agent), sc.issues, deal);
}

std::vector<Deal> enumerate_deals(const Scenario& sc) {
  std::uint64_t n = sc.deal_space_size();
  if (n > kEnumerationLimit)
    throw EnumerationRefused("deal space has " + std::to_string(n) + " deals (limit " +
                                 std::to_string(kEnumerationLimit) + ")",
                             n);
  std::size_t M = sc.issues.size();
  std::vector<Deal> out;
  out.reserve(static_cast<std::size_t>(n));
  Deal cur;
  cur.values.assign(M, 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    out.push_back(cur);
    // lexicographic increment, last issue fastest
    for (std::size_t m = M; m-- > 0;) {
      if (++cur.values[m] < sc.issues[m].num_values) break;
      cur.values[m] = 0;
    }
  }
  return out;
}

Scenario random_scenario(const GeneratorConfig& cfg, std::uint64_t seed) {
  if (cfg.num_agents < 2) throw ScenarioError("generator: num_agents must be >= 2");
  if (cfg.num_issues < 1) throw ScenarioError("generator: num_issues must be >= 1");
  if (cfg.num_values.empty()) throw ScenarioError("generator: num_values empty");
  std::mt19937_64 rng(seed);

  Scenario sc;
  sc.num_agents = cfg.num_agents;
  sc.seed = seed;
  sc.budgets = cfg.budgets;
  for (int m = 0; m < cfg.num_issues; ++m)
    sc.issues.push_back(Issue::evenly_spaced(m, cfg.num_values[m % cfg.num_values.size()]));

  // Per-issue opposition decision shared across agents.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<bool> opposed(cfg.num_issues);
  for (int m = 0; m < cfg.num_issues; ++m) opposed[m] = unif(rng) < cfg.opposed_prob;

  std::gamma_distribution<double> gamma(cfg.weight_concentration, 1.0);
  std::uniform_real_distribution<double> res_dist(cfg.reservation_min, cfg.reservation_max);

  for (int i = 0; i < cfg.num_agents; ++i) {
    PreferenceProfile p;
    p.agent_id = i;
    p.weights.resize(cfg.num_issues);
    double wsum = 0;
    for (auto& w : p.weights) {
      w = gamma(rng);
      if (w < 1e-12) w = 1e-12;
      wsum += w;
    }
    for (auto& w : p.weights) w /= wsum;
    // exact renormalization guard for the 1e-9 invariant
    double check = 0;
    for (double w : p.weights) check += w;
    p.weights.back() += 1.0 - check;

    bool first_half = i < (cfg.num_agents + 1) / 2;
    for (int m = 0; m < cfg.num_issues; ++m) {
      int V = sc.issues[m].num_values;
      std::vector<double> vals(V);
      vals[0] = 0.0;
      vals[V - 1] = 1.0;
      for (int k = 1; k < V - 1; ++k) vals[k] = unif(rng);
      std::sort(vals.begin(), vals.end());
      bool increasing = first_half || !opposed[m];
      if (!increasing) std::reverse(vals.begin(), vals.end());
      p.valuations.push_back(std::move(vals));
    }
    p.reservation = res_dist(rng);
    sc.profiles.push_back(std::move(p));
  }
  sc.validate();
  return sc;
}

nlohmann::ordered_json scenario_to_json(const Scenario& sc) {
  nlohmann::ordered_json j;
  j["format"] = "diplomat-scenario/1";
  j["num_agents"] = sc.num_agents;
  j["seed"] = sc.seed;
  j["budgets"] = sc.budgets.rounds;
  j["issues"] = nlohmann::ordered_json::array();
  for (const auto& is : sc.issues) {
    nlohmann::ordered_json ji;
    ji["id"] = is.id;
    ji["num_values"] = is.num_values;
    ji["value_grid"] = is.value_grid;
    j["issues"].push_back(ji);
  }
  j["profiles"] = nlohmann::ordered_json::array();
  for (const auto& p : sc.profiles) {
    nlohmann::ordered_json jp;
    jp["agent_id"] = p.agent_id;
    jp["weights"] = p.weights;
    jp["valuations"] = p.valuations;
    jp["reservation"] = p.reservation;
    j["profiles"].push_back(jp);
  }
  return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != std::string("diplomat-scenario/1"))
    throw ScenarioError("unsupported scenario format: " + j.value("format", "<missing>"));
  Scenario sc;
  sc.num_agents = j.at("num_agents").get<int>();
  sc.seed = j.at("seed").get<std::uint64_t>();
  auto b = j.at("budgets").get<std::vector<int>>();
  if (b.size() != 5) throw ScenarioError("budgets must have 5 entries");
  std::copy(b.begin(), b.end(), sc.budgets.rounds.begin());
  for (const auto& ji : j.at("issues")) {
    Issue is;
    is.id = ji.at("id").get<int>();
    is.num_values = ji.at("num_values").get<int>();
    is.value_grid = ji.at("value_grid").get<std::vector<double>>();
    sc.issues.push_back(std::move(is));
  }
  for (const auto& jp : j.at("profiles")) {
    PreferenceProfile p;
    p.agent_id = jp.at("agent_id").get<int>();
    p.weights = jp.at("weights").get<std::vector<double>>();
    p.valuations = jp.at("valuations").get<std::vector<std::vector<double>>>();
    p.reservation = jp.at("reservation").get<double>();
    sc.profiles.push_back(std::move(p));
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  nlohmann::json j;
  in >> j;
  return scenario_from_json(j);
}

void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file: " + path);
  out << scenario_to_json(sc).dump(2) << "\n";
}

}  // namespace diplomat::domain
