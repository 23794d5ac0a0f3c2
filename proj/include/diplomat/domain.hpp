#pragma once
// Negotiation instances: issues on discrete value grids, private additive
// utilities, and exhaustive deal enumeration for small instances.

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace diplomat::domain {

struct InvalidDeal : std::runtime_error {
  explicit InvalidDeal(const std::string& msg) : std::runtime_error(msg) {}
};

struct EnumerationRefused : std::runtime_error {
  EnumerationRefused(const std::string& msg, std::uint64_t cardinality)
      : std::runtime_error(msg), cardinality(cardinality) {}
  std::uint64_t cardinality;
};

struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Issue {
  int id = 0;
  int num_values = 2;
  std::vector<double> value_grid;  // evenly spaced, [0,1], strictly increasing

  static Issue evenly_spaced(int id, int num_values);
  void validate() const;
};

struct PreferenceProfile {
  int agent_id = 0;
  std::vector<double> weights;                   // length M, sum to 1
  std::vector<std::vector<double>> valuations;   // per issue, per grid value, in [0,1]
  double reservation = 0.0;

  void validate(const std::vector<Issue>& issues) const;
};

struct Deal {
  std::vector<int> values;  // grid index per issue

  bool operator==(const Deal& o) const { return values == o.values; }
  bool operator<(const Deal& o) const { return values < o.values; }
};

// Per-phase round budgets, in protocol phase order:
// initialization, exploration, proposal exchange, argumentation, convergence.
struct RoundBudgets {
  std::array<int, 5> rounds{1, 2, 4, 2, 3};

  int total() const;
  void validate() const;
};

struct Scenario {
  int num_agents = 2;
  std::vector<Issue> issues;
  std::vector<PreferenceProfile> profiles;
  RoundBudgets budgets;
  std::uint64_t seed = 0;

  int num_issues() const { return static_cast<int>(issues.size()); }
  void validate() const;
  std::uint64_t deal_space_size() const;  // saturates at uint64 max
  bool deal_valid(const Deal& d) const;
};

// Sum over issues of weight * valuation at the chosen grid index.
double utility(const PreferenceProfile& profile, const std::vector<Issue>& issues,
               const Deal& deal);
double utility(const Scenario& sc, int agent, const Deal& deal);

// All deals in lexicographic index order. Refuses spaces larger than 10^6.
std::vector<Deal> enumerate_deals(const Scenario& sc);
constexpr std::uint64_t kEnumerationLimit = 1'000'000;

struct GeneratorConfig {
  int num_agents = 2;
  int num_issues = 1;
  std::vector<int> num_values{5};    // cycled over issues if shorter than M
  double weight_concentration = 1.0;  // symmetric Dirichlet parameter
  double opposed_prob = 0.5;          // per-issue chance of split preferences
  double reservation_min = 0.05;
  double reservation_max = 0.2;
  RoundBudgets budgets;
};

// Deterministic per seed. Weights ~ symmetric Dirichlet; valuations are
// monotone per issue, opposed between agent halves with opposed_prob.
Scenario random_scenario(const GeneratorConfig& cfg, std::uint64_t seed);

// Scenario file format "diplomat-scenario/1".
nlohmann::ordered_json scenario_to_json(const Scenario& sc);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& sc, const std::string& path);

}  // namespace diplomat::domain
