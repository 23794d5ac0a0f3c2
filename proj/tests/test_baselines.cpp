#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diplomat/baselines.hpp"
#include "diplomat/env.hpp"

using namespace diplomat;
using Tag = protocol::Message::Tag;

namespace {

domain::Scenario make_scenario(int agents, int issues, int values, std::uint64_t seed) {
  domain::GeneratorConfig cfg;
  cfg.num_agents = agents;
  cfg.num_issues = issues;
  cfg.num_values = {values};
  return domain::random_scenario(cfg, seed);
}

domain::Scenario identical_bilateral(int values = 5) {
  domain::Scenario sc;
  sc.num_agents = 2;
  sc.issues = {domain::Issue::evenly_spaced(0, values)};
  for (int a = 0; a < 2; ++a) {
    domain::PreferenceProfile p;
    p.agent_id = a;
    p.weights = {1.0};
    std::vector<double> v(values);
    for (int k = 0; k < values; ++k) v[k] = static_cast<double>(k) / (values - 1);
    p.valuations = {v};
    p.reservation = 0.1;
    sc.profiles.push_back(p);
  }
  sc.validate();
  return sc;
}

}  // namespace

TEST_CASE("conceder target curve endpoints and shape") {
  CHECK(baselines::conceder_target(0.2, 0, 10, 1.0) == doctest::Approx(1.0));
  CHECK(baselines::conceder_target(0.0, 5, 10, 1.0) == doctest::Approx(0.5));
  CHECK(baselines::conceder_target(0.2, 10, 10, 1.0) == doctest::Approx(0.2));
  // monotone nonincreasing, and Boulware stays above the linear curve
  for (double beta : {0.3, 1.0, 3.0}) {
    double prev = 2.0;
    for (int t = 0; t <= 12; ++t) {
      double u = baselines::conceder_target(0.1, t, 12, beta);
      CHECK(u <= prev + 1e-12);
      prev = u;
    }
  }
  CHECK(baselines::conceder_target(0.0, 3, 12, 0.5) >
        baselines::conceder_target(0.0, 3, 12, 2.0));
}

TEST_CASE("conceder accepts at or above its target and counters below it") {
  domain::Scenario sc = identical_bilateral();
  sc.budgets = {{0, 0, 6, 0, 0}};
  protocol::ProtocolState st;
  protocol::apply_message(st, sc, 0, protocol::Message::propose({{4}}));
  // agent 1 sees utility 1.0 >= any target
  auto a = baselines::conceder_policy(st, sc, 1, 1.0);
  CHECK(a.tag == Tag::Accept);

  protocol::ProtocolState st2;
  protocol::apply_message(st2, sc, 0, protocol::Message::propose({{0}}));
  auto b = baselines::conceder_policy(st2, sc, 1, 1.0);
  CHECK(b.tag == Tag::Counteroffer);
}

TEST_CASE("alternating offers: identical preferences settle on the shared optimum") {
  domain::Scenario sc = identical_bilateral();
  env::Env e(sc, {}, 0);
  baselines::AlternatingOffersState m0, m1;
  while (!e.done()) {
    auto a0 = baselines::alternating_offers_policy(m0, e.state(), sc, 0);
    auto a1 = baselines::alternating_offers_policy(m1, e.state(), sc, 1);
    e.step({a0, a1});
  }
  REQUIRE(protocol::outcome(e.state()) == protocol::Status::Agreement);
  auto er = e.result();
  CHECK(er.outcome.deal.values == std::vector<int>{4});
  CHECK(er.final_utilities[0] == doctest::Approx(1.0));
}

TEST_CASE("alternating offers never repeats a deal while alternatives remain") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    domain::Scenario sc = make_scenario(2, 2, 3, seed);
    sc.budgets = {{0, 0, 6, 0, 0}};
    env::Env e(sc, {}, seed);
    baselines::AlternatingOffersState m0, m1;
    std::set<std::vector<int>> seen0;
    while (!e.done()) {
      auto a0 = baselines::alternating_offers_policy(m0, e.state(), sc, 0);
      auto a1 = baselines::alternating_offers_policy(m1, e.state(), sc, 1);
      if (a0.explicit_deal) {
        // a repeat is only allowed when every above-target deal was proposed
        double frac = std::min(1.0, static_cast<double>(e.state().round) / sc.budgets.total());
        double target = 1.0 - frac * (1.0 - sc.profiles[0].reservation);
        bool fresh_available = false;
        for (const auto& d : domain::enumerate_deals(sc))
          if (domain::utility(sc, 0, d) >= target - 1e-12 && !seen0.count(d.values))
            fresh_available = true;
        if (fresh_available) CHECK(!seen0.count(a0.explicit_deal->values));
        seen0.insert(a0.explicit_deal->values);
      }
      e.step({a0, a1});
    }
  }
}

TEST_CASE("baseline actions never trigger illegal-move substitution") {
  std::mt19937_64 rng(42);
  int steps = 0;
  std::uint64_t seed = 0;
  while (steps < 100000) {
    domain::Scenario sc = make_scenario(2 + static_cast<int>(seed % 3), 1 + seed % 2, 4, seed);
    env::Env e(sc, {}, seed);
    std::vector<baselines::AlternatingOffersState> mem(sc.num_agents);
    while (!e.done()) {
      std::vector<env::AgentAction> acts;
      for (int i = 0; i < sc.num_agents; ++i) {
        env::AgentAction a;
        switch ((steps + i) % 4) {
          case 0: a = baselines::conceder_policy(e.state(), sc, i, 0.5); break;
          case 1: a = baselines::conceder_policy(e.state(), sc, i, 2.0); break;
          case 2: a = baselines::alternating_offers_policy(mem[i], e.state(), sc, i); break;
          default: a = baselines::random_policy(e.state(), sc, i, rng); break;
        }
        bool illegal = false;
        e.decode_action(i, a, &illegal);
        CHECK(!illegal);
        acts.push_back(a);
        ++steps;
      }
      e.step(acts);
    }
    ++seed;
  }
}

TEST_CASE("random policy spreads uniformly over legal tags") {
  domain::Scenario sc = identical_bilateral();
  sc.budgets = {{0, 0, 6, 0, 0}};
  protocol::ProtocolState st;
  protocol::apply_message(st, sc, 0, protocol::Message::propose({{2}}));
  // agent 1 responder in proposal exchange: Propose, Pass, Accept, Reject, Counteroffer
  auto legal = protocol::legal_moves(st, sc, 1);
  REQUIRE(legal.size() == 5);
  std::mt19937_64 rng(7);
  std::map<Tag, int> counts;
  int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[baselines::random_policy(st, sc, 1, rng).tag];
  double p = 1.0 / 5, sigma = std::sqrt(n * p * (1 - p));
  for (Tag t : legal) CHECK(std::abs(counts[t] - n * p) <= 3 * sigma);
}

TEST_CASE("random policy is deterministic under a fixed seed") {
  domain::Scenario sc = make_scenario(3, 2, 3, 5);
  protocol::ProtocolState st;
  std::mt19937_64 r1(11), r2(11);
  for (int i = 0; i < 100; ++i) {
    auto a = baselines::random_policy(st, sc, 0, r1);
    auto b = baselines::random_policy(st, sc, 0, r2);
    CHECK(a.tag == b.tag);
    CHECK(a.deal_choice == b.deal_choice);
    CHECK(a.concession == b.concession);
  }
}
