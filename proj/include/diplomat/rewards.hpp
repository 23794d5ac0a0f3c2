#pragma once
// Reward shaping: outcome/process/social/intrinsic components and their
// weighted total, the episode-level system objective, and the Bayesian
// opponent-preference belief model that powers the intrinsic term.

#include <array>
#include <stdexcept>
#include <vector>

#include "diplomat/domain.hpp"
#include "diplomat/protocol.hpp"

namespace diplomat::rewards {

struct RewardWeights {
  double outcome = 1.0;
  double process = 0.1;
  double social = 0.1;
  double intrinsic = 0.05;
};

struct ObjectiveWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.5;
};

// Shaping constants; all exposed through the run config.
struct ShapingConstants {
  double time_cost = 0.01;            // per-round cost
  double improve_bonus = 0.05;        // joint-welfare-improving proposal
  double illegal_penalty = 0.1;       // illegal action substituted with Pass
  double social_scale = 0.1;          // per accepted-fraction of own proposal
  double reveal_eps = 0.1;            // reveal observation noise
  double accept_logit_k = 5.0;        // accept/reject likelihood sharpness
  double argue_shift = 0.4;           // argue likelihood = 0.5 + shift * strength
  double convergence_time_mult = 2.0; // time cost multiplier in convergence
};

struct RewardBreakdown {
  double outcome = 0;
  double process = 0;
  double social = 0;
  double intrinsic = 0;
  double total = 0;
};

// Posterior held by one observer about one opponent.
struct OpponentBelief {
  // weight_buckets[m][b]: posterior that issue m carries bucket-b weight
  std::vector<std::vector<double>> weight_buckets;
  // direction[m] = {P(increasing), P(decreasing)} valuations on issue m
  std::vector<std::array<double, 2>> direction;

  static OpponentBelief uniform(int num_issues);
  double entropy() const;  // sum over all categoricals, nats
};

// Beliefs of one agent about every other agent; the self slot stays unset.
struct BeliefState {
  std::vector<OpponentBelief> about;  // indexed by agent id

  static BeliefState uniform(int num_agents, int num_issues, int self);
  double entropy() const;
};

// Relative-weight bucket boundaries: bucket 0 below 0.75/M, bucket 2 above
// 1.5/M, bucket 1 between. Representative relative weights 0.5, 1.0, 2.0.
int weight_bucket_of(double weight, int num_issues);
double bucket_representative(int bucket);

// Expected utility of `deal` for the modeled opponent under the posterior:
// bucket-mean weights (renormalized across issues) and direction-mixed
// monotone valuations on the issue grid.
double belief_expected_utility(const OpponentBelief& belief, const domain::Scenario& sc,
                               const domain::Deal& deal);

// Bayes update of the observer's belief about `issuer` from one public
// message. Unrelated tags (Propose/Counteroffer/Pass) leave it unchanged;
// Accept/Reject condition on the referenced deal.
void update_belief(OpponentBelief& belief, const protocol::Message& msg,
                   const domain::Scenario& sc, const domain::Deal* referenced_deal,
                   const ShapingConstants& k = {});

// Eq-style components ---------------------------------------------------------

// Terminal outcome component: (U - res)/(1 - res) clipped to [-1,1] on
// agreement, 0 on failure and on nonterminal steps.
double outcome_reward(double agreement_utility, double reservation, bool agreed);

struct ProcessContext {
  bool illegal_substituted = false;
  bool improved_joint_welfare = false;  // new proposal beats previous standing
  protocol::Phase phase = protocol::Phase::Initialization;
};
double process_reward(const ProcessContext& ctx, const ShapingConstants& k = {});

// social_scale times the fraction of other agents that accepted the acting
// agent's standing proposal this round; 0 without a standing proposal.
double social_reward(int accepts_this_round, int num_opponents, bool has_standing,
                     const ShapingConstants& k = {});

// Information gain in nats, clipped below at 0.
double intrinsic_reward(double entropy_before, double entropy_after);

RewardBreakdown total_reward(double outcome, double process, double social, double intrinsic,
                             const RewardWeights& w);

// Episode objective: alpha * sum U_i + beta * Consensus - gamma * Time, with
// Consensus = satisfied-fraction * (1 - Gini) and Time = rounds/total budget.
// On failure the utilities argument should hold the reservations; Consensus
// is forced to 0.
double system_objective(bool agreed, const std::vector<double>& utilities,
                        const std::vector<double>& reservations, int rounds, int total_budget,
                        const ObjectiveWeights& w);

}  // namespace diplomat::rewards
