#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "diplomat/domain.hpp"

using namespace diplomat::domain;

namespace {

Scenario two_issue_scenario() {
  Scenario sc;
  sc.num_agents = 2;
  sc.issues = {Issue::evenly_spaced(0, 2), Issue::evenly_spaced(1, 2)};
  PreferenceProfile a;
  a.agent_id = 0;
  a.weights = {0.5, 0.5};
  a.valuations = {{0.0, 1.0}, {1.0, 0.0}};
  a.reservation = 0.1;
  PreferenceProfile b;
  b.agent_id = 1;
  b.weights = {0.2, 0.8};
  b.valuations = {{0.5, 0.25}, {0.0, 0.25}};
  b.reservation = 0.1;
  sc.profiles = {a, b};
  return sc;
}

}  // namespace

TEST_CASE("utility: convex combinations of picked valuations") {
  Scenario sc = two_issue_scenario();
  // weights (0.5,0.5), picks valuations (1, 0)
  CHECK(utility(sc, 0, Deal{{1, 1}}) == doctest::Approx(0.5));
  // weights (0.2,0.8), picks (0.5, 0.25) -> 0.1 + 0.2
  CHECK(utility(sc, 1, Deal{{0, 1}}) == doctest::Approx(0.3));
}

TEST_CASE("utility: top valuations everywhere give 1.0") {
  Scenario sc = two_issue_scenario();
  CHECK(utility(sc, 0, Deal{{1, 0}}) == doctest::Approx(1.0));
}

TEST_CASE("utility: invalid deal raises") {
  Scenario sc = two_issue_scenario();
  CHECK_THROWS_AS(utility(sc, 0, Deal{{0, 5}}), InvalidDeal);
  CHECK_THROWS_AS(utility(sc, 0, Deal{{0}}), InvalidDeal);
}

TEST_CASE("enumerate_deals: counts and order") {
  GeneratorConfig cfg;
  cfg.num_agents = 2;

  SUBCASE("2 issues x 3 values -> 9 deals") {
    cfg.num_issues = 2;
    cfg.num_values = {3};
    Scenario sc = random_scenario(cfg, 1);
    CHECK(enumerate_deals(sc).size() == 9);
  }
  SUBCASE("1 issue x 5 values -> indices 0..4 in order") {
    cfg.num_issues = 1;
    cfg.num_values = {5};
    Scenario sc = random_scenario(cfg, 1);
    auto deals = enumerate_deals(sc);
    REQUIRE(deals.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(deals[k].values == std::vector<int>{k});
  }
  SUBCASE("3 issues x (2,3,4) values -> 24 deals, lexicographic, unique") {
    cfg.num_issues = 3;
    cfg.num_values = {2, 3, 4};
    Scenario sc = random_scenario(cfg, 1);
    auto deals = enumerate_deals(sc);
    REQUIRE(deals.size() == 24);
    CHECK(std::is_sorted(deals.begin(), deals.end()));
    CHECK(std::adjacent_find(deals.begin(), deals.end()) == deals.end());
  }
  SUBCASE("too-large space refused with computed cardinality") {
    cfg.num_issues = 4;
    cfg.num_values = {64};
    Scenario sc = random_scenario(cfg, 1);
    try {
      enumerate_deals(sc);
      FAIL("expected EnumerationRefused");
    } catch (const EnumerationRefused& e) {
      CHECK(e.cardinality == 16777216ull);
    }
  }
}

TEST_CASE("random_scenario: determinism, opposition, weight normalization") {
  GeneratorConfig cfg;
  cfg.num_agents = 2;
  cfg.num_issues = 1;
  cfg.num_values = {5};
  cfg.opposed_prob = 1.0;

  SUBCASE("same seed gives identical scenarios") {
    Scenario a = random_scenario(cfg, 42);
    Scenario b = random_scenario(cfg, 42);
    CHECK(scenario_to_json(a) == scenario_to_json(b));
  }

  SUBCASE("opposed_prob=1 reverses valuation orders between the two agents") {
    Scenario sc = random_scenario(cfg, 9);
    const auto& v0 = sc.profiles[0].valuations[0];
    const auto& v1 = sc.profiles[1].valuations[0];
    CHECK(std::is_sorted(v0.begin(), v0.end()));
    CHECK(std::is_sorted(v1.rbegin(), v1.rend()));
    CHECK(v0.front() == 0.0);
    CHECK(v1.front() == 1.0);
  }

  SUBCASE("weights sum to 1 within 1e-9 over 1000 draws") {
    GeneratorConfig multi = cfg;
    multi.num_issues = 4;
    multi.num_values = {3};
    multi.weight_concentration = 0.7;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      Scenario sc = random_scenario(multi, s);
      for (const auto& p : sc.profiles) {
        double sum = 0;
        for (double w : p.weights) sum += w;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("utility is monotone in valuations") {
  GeneratorConfig cfg;
  cfg.num_agents = 2;
  cfg.num_issues = 3;
  cfg.num_values = {4};
  Scenario sc = random_scenario(cfg, 17);
  Deal d{{1, 2, 0}};
  double base = utility(sc, 0, d);
  Scenario raised = sc;
  raised.profiles[0].valuations[1][2] =
      std::min(1.0, raised.profiles[0].valuations[1][2] + 0.1);
  CHECK(utility(raised, 0, d) >= base);
}

TEST_CASE("additivity: per-issue argmax composes to the global optimum") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig cfg;
    cfg.num_agents = 2;
    cfg.num_issues = 3;
    cfg.num_values = {4, 5, 3};
    cfg.opposed_prob = 0.5;
    Scenario sc = random_scenario(cfg, seed);
    for (int agent = 0; agent < 2; ++agent) {
      const auto& p = sc.profiles[agent];
      Deal greedy;
      for (int m = 0; m < sc.num_issues(); ++m) {
        int best = 0;
        for (int k = 1; k < sc.issues[m].num_values; ++k)
          if (p.valuations[m][k] > p.valuations[m][best]) best = k;
        greedy.values.push_back(best);
      }
      double brute = -1;
      for (const auto& d : enumerate_deals(sc)) brute = std::max(brute, utility(sc, agent, d));
      CHECK(utility(sc, agent, greedy) == doctest::Approx(brute));
    }
  }
}

TEST_CASE("scenario json round-trip") {
  GeneratorConfig cfg;
  cfg.num_agents = 3;
  cfg.num_issues = 2;
  cfg.num_values = {3, 4};
  Scenario sc = random_scenario(cfg, 123);
  std::string path = "test_scenario_tmp.json";
  save_scenario(sc, path);
  Scenario back = load_scenario(path);
  CHECK(scenario_to_json(back) == scenario_to_json(sc));
  std::remove(path.c_str());
}

TEST_CASE("scenario validation rejects malformed instances") {
  Scenario sc = two_issue_scenario();
  SUBCASE("bad weights") {
    sc.profiles[0].weights = {0.5, 0.6};
    CHECK_THROWS_AS(sc.validate(), ScenarioError);
  }
  SUBCASE("reservation >= 1") {
    sc.profiles[1].reservation = 1.0;
    CHECK_THROWS_AS(sc.validate(), ScenarioError);
  }
  SUBCASE("missing profile") {
    sc.profiles.pop_back();
    CHECK_THROWS_AS(sc.validate(), ScenarioError);
  }
}
