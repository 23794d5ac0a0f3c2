#include "diplomat/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "diplomat/evaluation.hpp"

namespace diplomat::rewards {

OpponentBelief OpponentBelief::uniform(int num_issues) {
  OpponentBelief b;
  b.weight_buckets.assign(num_issues,
                          std::vector<double>(protocol::kRevealBuckets,
                                              1.0 / protocol::kRevealBuckets));
  b.direction.assign(num_issues, {0.5, 0.5});
  return b;
}

namespace {

double categorical_entropy(const double* p, std::size_t n) {
  double h = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (p[i] > 0) h -= p[i] * std::log(p[i]);
  return h;
}

void renormalize(double* p, std::size_t n) {
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) z += p[i];
  if (z <= 0) {  // degenerate evidence; fall back to uniform
    for (std::size_t i = 0; i < n; ++i) p[i] = 1.0 / n;
    return;
  }
  for (std::size_t i = 0; i < n; ++i) p[i] /= z;
}

}  // namespace

double OpponentBelief::entropy() const {
  double h = 0;
  for (const auto& row : weight_buckets) h += categorical_entropy(row.data(), row.size());
  for (const auto& d : direction) h += categorical_entropy(d.data(), 2);
  return h;
}

BeliefState BeliefState::uniform(int num_agents, int num_issues, int self) {
  BeliefState s;
  s.about.resize(num_agents);
  for (int j = 0; j < num_agents; ++j)
    if (j != self) s.about[j] = OpponentBelief::uniform(num_issues);
  return s;
}

double BeliefState::entropy() const {
  double h = 0;
  for (const auto& b : about) h += b.entropy();
  return h;
}

int weight_bucket_of(double weight, int num_issues) {
  double rel = weight * num_issues;
  if (rel < 0.75) return 0;
  if (rel > 1.5) return 2;
  return 1;
}

double bucket_representative(int bucket) {
  switch (bucket) {
    case 0: return 0.5;
    case 1: return 1.0;
    default: return 2.0;
  }
}

namespace {

// Expected utility with issue m's weight bucket or direction optionally pinned.
double expected_utility_conditional(const OpponentBelief& belief, const domain::Scenario& sc,
                                    const domain::Deal& deal, int pin_issue, int pin_bucket,
                                    int pin_direction) {
  std::size_t M = sc.issues.size();
  std::vector<double> w(M);
  double wsum = 0;
  for (std::size_t m = 0; m < M; ++m) {
    if (static_cast<int>(m) == pin_issue && pin_bucket >= 0) {
      w[m] = bucket_representative(pin_bucket);
    } else {
      double acc = 0;
      for (int b = 0; b < protocol::kRevealBuckets; ++b)
        acc += belief.weight_buckets[m][b] * bucket_representative(b);
      w[m] = acc;
    }
    wsum += w[m];
  }
  double u = 0;
  for (std::size_t m = 0; m < M; ++m) {
    double g = sc.issues[m].value_grid[deal.values[m]];
    double p_inc = belief.direction[m][0];
    if (static_cast<int>(m) == pin_issue && pin_direction >= 0)
      p_inc = pin_direction == 0 ? 1.0 : 0.0;
    double v = p_inc * g + (1.0 - p_inc) * (1.0 - g);
    u += (w[m] / wsum) * v;
  }
  return u;
}

}  // namespace

double belief_expected_utility(const OpponentBelief& belief, const domain::Scenario& sc,
                               const domain::Deal& deal) {
  return expected_utility_conditional(belief, sc, deal, -1, -1, -1);
}

void update_belief(OpponentBelief& belief, const protocol::Message& msg,
                   const domain::Scenario& sc, const domain::Deal* referenced_deal,
                   const ShapingConstants& k) {
  using Tag = protocol::Message::Tag;
  const int B = protocol::kRevealBuckets;
  switch (msg.tag) {
    case Tag::Reveal: {
      auto& row = belief.weight_buckets[msg.issue_id];
      for (int b = 0; b < B; ++b)
        row[b] *= (b == msg.bucket) ? (1.0 - k.reveal_eps) : k.reveal_eps / (B - 1);
      renormalize(row.data(), row.size());
      break;
    }
    case Tag::Argue: {
      auto& d = belief.direction[msg.issue_id];
      double toward = 0.5 + k.argue_shift * msg.strength;
      int idx = msg.direction == protocol::Direction::Raise ? 0 : 1;
      d[idx] *= toward;
      d[1 - idx] *= 1.0 - toward;
      renormalize(d.data(), 2);
      break;
    }
    case Tag::Accept:
    case Tag::Reject: {
      if (referenced_deal == nullptr) break;
      const domain::Deal& deal = *referenced_deal;
      bool accepted = msg.tag == Tag::Accept;
      // Per-categorical conditional update: each issue's bucket (and
      // direction) posterior is reweighted by the acceptance likelihood of
      // the deal with that coordinate pinned and the rest marginalized.
      for (std::size_t m = 0; m < sc.issues.size(); ++m) {
        auto& row = belief.weight_buckets[m];
        std::vector<double> like(B);
        for (int b = 0; b < B; ++b) {
          double u = expected_utility_conditional(belief, sc, deal, static_cast<int>(m), b, -1);
          double p = 1.0 / (1.0 + std::exp(-k.accept_logit_k * (u - 0.5)));
          like[b] = accepted ? p : 1.0 - p;
        }
        for (int b = 0; b < B; ++b) row[b] *= like[b];
        renormalize(row.data(), row.size());
      }
      for (std::size_t m = 0; m < sc.issues.size(); ++m) {
        auto& d = belief.direction[m];
        for (int dir = 0; dir < 2; ++dir) {
          double u = expected_utility_conditional(belief, sc, deal, static_cast<int>(m), -1, dir);
          double p = 1.0 / (1.0 + std::exp(-k.accept_logit_k * (u - 0.5)));
          d[dir] *= accepted ? p : 1.0 - p;
        }
        renormalize(d.data(), 2);
      }
      break;
    }
    case Tag::Propose:
    case Tag::Counteroffer:
    case Tag::Pass:
      break;
  }
}

double outcome_reward(double agreement_utility, double reservation, bool agreed) {
  if (!agreed) return 0.0;
  double r = (agreement_utility - reservation) / (1.0 - reservation);
  return std::clamp(r, -1.0, 1.0);
}

double process_reward(const ProcessContext& ctx, const ShapingConstants& k) {
  double mult = ctx.phase == protocol::Phase::Convergence ? k.convergence_time_mult : 1.0;
  double r = -k.time_cost * mult;
  if (ctx.improved_joint_welfare) r += k.improve_bonus;
  if (ctx.illegal_substituted) r -= k.illegal_penalty;
  return r;
}

double social_reward(int accepts_this_round, int num_opponents, bool has_standing,
                     const ShapingConstants& k) {
  if (!has_standing || num_opponents <= 0) return 0.0;
  return k.social_scale * static_cast<double>(accepts_this_round) / num_opponents;
}

double intrinsic_reward(double entropy_before, double entropy_after) {
  return std::max(0.0, entropy_before - entropy_after);
}

RewardBreakdown total_reward(double outcome, double process, double social, double intrinsic,
                             const RewardWeights& w) {
  RewardBreakdown b;
  b.outcome = outcome;
  b.process = process;
  b.social = social;
  b.intrinsic = intrinsic;
  b.total = w.outcome * outcome + w.process * process + w.social * social +
            w.intrinsic * intrinsic;
  return b;
}

double system_objective(bool agreed, const std::vector<double>& utilities,
                        const std::vector<double>& reservations, int rounds, int total_budget,
                        const ObjectiveWeights& w) {
  double usum = 0;
  for (double u : utilities) usum += u;
  double consensus = 0;
  if (agreed) {
    int satisfied = 0;
    for (std::size_t i = 0; i < utilities.size(); ++i)
      if (utilities[i] >= reservations[i]) ++satisfied;
    consensus = (static_cast<double>(satisfied) / utilities.size()) *
                (1.0 - evaluation::gini(utilities));
  }
  double time_frac = total_budget > 0 ? static_cast<double>(rounds) / total_budget : 0.0;
  return w.alpha * usum + w.beta * consensus - w.gamma * time_frac;
}

}  // namespace diplomat::rewards
