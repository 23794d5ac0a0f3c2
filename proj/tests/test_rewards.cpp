#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "diplomat/evaluation.hpp"
#include "diplomat/rewards.hpp"

using namespace diplomat;
using namespace diplomat::rewards;

namespace {

domain::Scenario make_scenario(int agents = 2, int issues = 1, int values = 5,
                               std::uint64_t seed = 3) {
  domain::GeneratorConfig cfg;
  cfg.num_agents = agents;
  cfg.num_issues = issues;
  cfg.num_values = {values};
  return domain::random_scenario(cfg, seed);
}

}  // namespace

TEST_CASE("outcome_reward formula") {
  CHECK(outcome_reward(1.0, 0.2, true) == doctest::Approx(1.0));
  CHECK(outcome_reward(0.2, 0.2, true) == doctest::Approx(0.0));
  CHECK(outcome_reward(0.5, 0.3, false) == 0.0);
  // clipped below at -1
  CHECK(outcome_reward(0.0, 0.9, true) == doctest::Approx(-1.0));
}

TEST_CASE("process_reward defaults") {
  ProcessContext ctx;
  ctx.phase = protocol::Phase::ProposalExchange;
  CHECK(process_reward(ctx) == doctest::Approx(-0.01));
  ctx.improved_joint_welfare = true;
  CHECK(process_reward(ctx) == doctest::Approx(0.04));
  ctx.improved_joint_welfare = false;
  ctx.illegal_substituted = true;
  CHECK(process_reward(ctx) == doctest::Approx(-0.11));
  // convergence phase doubles the time cost
  ctx.illegal_substituted = false;
  ctx.phase = protocol::Phase::Convergence;
  CHECK(process_reward(ctx) == doctest::Approx(-0.02));
}

TEST_CASE("social_reward fractions") {
  CHECK(social_reward(2, 3, true) == doctest::Approx(0.1 * 2.0 / 3.0));
  CHECK(social_reward(0, 3, false) == 0.0);
  CHECK(social_reward(3, 3, true) == doctest::Approx(0.1));
}

TEST_CASE("update_belief: reveal posterior matches the closed form") {
  domain::Scenario sc = make_scenario();
  OpponentBelief b = OpponentBelief::uniform(1);
  update_belief(b, protocol::Message::reveal(0, 1), sc, nullptr);
  CHECK(b.weight_buckets[0][0] == doctest::Approx(0.05));
  CHECK(b.weight_buckets[0][1] == doctest::Approx(0.9));
  CHECK(b.weight_buckets[0][2] == doctest::Approx(0.05));
}

TEST_CASE("update_belief: unrelated messages leave belief unchanged") {
  domain::Scenario sc = make_scenario();
  OpponentBelief b = OpponentBelief::uniform(1);
  OpponentBelief before = b;
  update_belief(b, protocol::Message::pass(), sc, nullptr);
  update_belief(b, protocol::Message::propose(domain::Deal{{0}}), sc, nullptr);
  CHECK(b.weight_buckets == before.weight_buckets);
  CHECK(b.direction == before.direction);
}

TEST_CASE("update_belief: argue shifts the direction posterior toward dir") {
  domain::Scenario sc = make_scenario();
  OpponentBelief b = OpponentBelief::uniform(1);
  update_belief(b, protocol::Message::argue(0, protocol::Direction::Raise, 1.0), sc, nullptr);
  CHECK(b.direction[0][0] == doctest::Approx(0.9));
  CHECK(b.direction[0][1] == doctest::Approx(0.1));
}

TEST_CASE("belief posteriors stay valid distributions under 10^4 random updates") {
  domain::Scenario sc = make_scenario(2, 3, 4, 11);
  OpponentBelief b = OpponentBelief::uniform(3);
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<int> issue(0, 2);
  std::uniform_int_distribution<int> bucket(0, 2);
  std::uniform_int_distribution<int> val(0, 3);
  std::uniform_real_distribution<double> s(0, 1);
  for (int it = 0; it < 10000; ++it) {
    protocol::Message m;
    domain::Deal d{{val(rng), val(rng), val(rng)}};
    switch (kind(rng)) {
      case 0: m = protocol::Message::reveal(issue(rng), bucket(rng)); break;
      case 1:
        m = protocol::Message::argue(issue(rng),
                                     s(rng) < 0.5 ? protocol::Direction::Raise
                                                  : protocol::Direction::Lower,
                                     s(rng));
        break;
      case 2: m = protocol::Message::accept(0); break;
      default: m = protocol::Message::reject(0); break;
    }
    update_belief(b, m, sc, &d);
    for (const auto& row : b.weight_buckets) {
      double z = 0;
      for (double p : row) {
        CHECK(p >= 0);
        z += p;
      }
      CHECK(std::abs(z - 1.0) <= 1e-9);
    }
    for (const auto& dir : b.direction) {
      CHECK(std::abs(dir[0] + dir[1] - 1.0) <= 1e-9);
      CHECK(dir[0] >= 0);
    }
  }
}

TEST_CASE("intrinsic_reward entropy arithmetic") {
  // uniform-over-4 -> point mass: ln 4
  CHECK(intrinsic_reward(std::log(4.0), 0.0) == doctest::Approx(std::log(4.0)));
  // uniform-over-4 -> uniform-over-2: ln 2
  CHECK(intrinsic_reward(std::log(4.0), std::log(2.0)) == doctest::Approx(std::log(2.0)));
  CHECK(intrinsic_reward(1.5, 1.5) == 0.0);
  // entropy rise is clipped to zero
  CHECK(intrinsic_reward(0.5, 1.0) == 0.0);
}

TEST_CASE("accept observation concentrates belief toward deals the issuer likes") {
  domain::Scenario sc = make_scenario(2, 1, 5, 13);
  OpponentBelief b = OpponentBelief::uniform(1);
  // repeated accepts of the top-of-grid deal suggest increasing valuations
  domain::Deal top{{4}};
  for (int i = 0; i < 5; ++i) update_belief(b, protocol::Message::accept(0), sc, &top);
  CHECK(b.direction[0][0] > 0.9);
}

TEST_CASE("total_reward equals the lambda-weighted sum") {
  RewardWeights w;
  w.outcome = 1;
  w.process = 1;
  w.social = 1;
  w.intrinsic = 1;
  RewardBreakdown b = total_reward(0.5, -0.01, 0.1, 0.2, w);
  CHECK(b.total == doctest::Approx(0.79));

  RewardWeights only_outcome{1, 0, 0, 0};
  CHECK(total_reward(0.7, 0.3, 0.2, 0.1, only_outcome).total == doctest::Approx(0.7));
  CHECK(total_reward(0, 0, 0, 0, w).total == 0.0);

  // exactness on fuzzed inputs
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 1000; ++i) {
    RewardWeights rw{std::abs(u(rng)), std::abs(u(rng)), std::abs(u(rng)), std::abs(u(rng))};
    double o = u(rng), p = u(rng), s = u(rng), in = u(rng);
    RewardBreakdown bd = total_reward(o, p, s, in, rw);
    CHECK(bd.total == rw.outcome * o + rw.process * p + rw.social * s + rw.intrinsic * in);
  }
}

TEST_CASE("system_objective") {
  SUBCASE("alpha-only degenerate form") {
    CHECK(system_objective(true, {0.5, 0.7}, {0.1, 0.1}, 3, 10, {1, 0, 0}) ==
          doctest::Approx(1.2));
  }
  SUBCASE("failure case from definitions") {
    CHECK(system_objective(false, {0.2, 0.2}, {0.2, 0.2}, 10, 10, {1, 1, 1}) ==
          doctest::Approx(-0.6));
  }
  SUBCASE("equal utilities above reservation give consensus term 1") {
    double j0 = system_objective(true, {0.6, 0.6}, {0.1, 0.1}, 0, 10, {0, 1, 0});
    CHECK(j0 == doctest::Approx(1.0));
  }
  SUBCASE("monotone in each utility with beta = 0") {
    rewards::ObjectiveWeights w{1, 0, 0.5};
    double lo = system_objective(true, {0.4, 0.6}, {0.1, 0.1}, 5, 10, w);
    double hi = system_objective(true, {0.5, 0.6}, {0.1, 0.1}, 5, 10, w);
    CHECK(hi > lo);
  }
}

TEST_CASE("weight buckets and representatives") {
  // one issue: relative weight is the weight itself
  CHECK(weight_bucket_of(0.5, 1) == 0);
  CHECK(weight_bucket_of(1.0, 1) == 1);
  // four issues: 0.5 is twice the average weight
  CHECK(weight_bucket_of(0.5, 4) == 2);
  CHECK(weight_bucket_of(0.25, 4) == 1);
  CHECK(weight_bucket_of(0.1, 4) == 0);
}
