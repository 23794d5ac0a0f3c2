#pragma once
// Episode engine wrapping the protocol: observation building, action
// decoding, stepping, reward computation, and belief maintenance.

#include <cstdint>
#include <optional>
#include <vector>

#include "diplomat/domain.hpp"
#include "diplomat/protocol.hpp"
#include "diplomat/rewards.hpp"

namespace diplomat::env {

using Observation = std::vector<double>;

// Fixed observation layout for (N, M, value counts, B). Opponents are ordered
// by agent id with self skipped.
struct ObservationLayout {
  int num_agents = 0;
  int num_issues = 0;
  int sum_values = 0;

  static ObservationLayout of(const domain::Scenario& sc);

  // own weights (M) | reservation (1) | phase one-hot (5) | round fraction (1)
  // | standing deal one-hot (sum V) | own utility of standing (1)
  // | per opponent: tag one-hot (7) + argue dir/strength (2) + accepted (1)
  // | per opponent: weight-bucket posteriors (B*M)
  int per_opponent_behavior() const { return protocol::Message::kNumTags + 3; }
  int per_opponent_belief() const { return protocol::kRevealBuckets * num_issues; }
  int length() const;
};

struct AgentAction {
  protocol::Message::Tag tag = protocol::Message::Tag::Pass;
  // Per-issue sampled grid indices; part of the policy distribution, consulted
  // only when the move needs a deal.
  std::vector<int> deal_choice;
  // Concession scalar in [0,1]; present on every action.
  double concession = 0.0;
  // When set, Propose/Counteroffer carry this exact deal instead of the
  // concession-driven search result. Used by scripted negotiators.
  std::optional<domain::Deal> explicit_deal;
};

struct EnvConfig {
  rewards::RewardWeights reward_weights;
  rewards::ShapingConstants shaping;
  rewards::ObjectiveWeights objective_weights;
  protocol::ProtocolOptions protocol_opts;
  // Deal spaces larger than this use the per-issue greedy relaxation.
  std::uint64_t deal_search_cutoff = 100'000;
};

struct StepResult {
  std::vector<Observation> observations;
  std::vector<rewards::RewardBreakdown> rewards;
  bool done = false;
};

struct EpisodeResult {
  protocol::Outcome outcome;
  std::vector<double> final_utilities;  // utility on agreement, reservation on failure
  int rounds_used = 0;
  std::vector<protocol::LoggedMessage> transcript;
  std::vector<std::vector<rewards::RewardBreakdown>> reward_log;  // [step][agent]
};

// Aspiration-level proposal generation: target own utility
// u* = 1 - c*(1 - reservation); among feasible deals maximize estimated
// opponent welfare (mean belief-expected utility), ties to lowest
// lexicographic indices. Falls back to per-issue greedy above the cutoff.
domain::Deal target_utility_deal(const domain::Scenario& sc, int agent, double concession,
                                 const rewards::BeliefState& beliefs,
                                 std::uint64_t search_cutoff = 100'000);

// Embeds an observation into the layout of a larger (agents, per-issue value
// counts) shape: real entries keep their block positions, missing opponents,
// issues, and grid values read as zero. Identity when shapes match. Lets one
// fixed-size network play scenarios of varying size.
Observation pad_observation(const Observation& obs, const domain::Scenario& sc,
                            int pad_agents, const std::vector<int>& pad_values);

class Env {
 public:
  Env(domain::Scenario sc, EnvConfig cfg, std::uint64_t seed);

  const std::vector<Observation>& reset();
  StepResult step(const std::vector<AgentAction>& joint_actions);

  bool done() const { return state_.done(); }
  const domain::Scenario& scenario() const { return scenario_; }
  const protocol::ProtocolState& state() const { return state_; }
  const ObservationLayout& layout() const { return layout_; }
  const rewards::BeliefState& beliefs(int agent) const { return beliefs_[agent]; }
  const std::vector<Observation>& observations() const { return observations_; }

  // Decodes one agent's action into a concrete protocol message. An illegal
  // decoded message is substituted with Pass (flag set) rather than thrown.
  protocol::Message decode_action(int agent, const AgentAction& action,
                                  bool* illegal_substituted) const;

  // Valid once done() is true.
  EpisodeResult result() const;

  // Legality mask over message tags for the policy, in tag declaration order.
  std::vector<std::uint8_t> illegal_tag_mask(int agent) const;

 private:
  Observation build_observation(int agent) const;
  double estimated_joint_welfare(int agent, const domain::Deal& deal) const;

  domain::Scenario scenario_;
  EnvConfig cfg_;
  std::uint64_t seed_;
  ObservationLayout layout_;
  protocol::ProtocolState state_;
  std::vector<rewards::BeliefState> beliefs_;

  struct OpponentSummary {
    bool has_message = false;
    protocol::Message::Tag last_tag = protocol::Message::Tag::Pass;
    double argue_direction = 0.0;  // +1 raise, -1 lower, 0 none
    double argue_strength = 0.0;
  };
  // behavior_[j]: public summary of agent j's most recent message
  std::vector<OpponentSummary> behavior_;
  std::vector<int> reveal_counts_;  // reveals sent per agent, for issue cycling

  std::vector<Observation> observations_;
  std::vector<std::vector<rewards::RewardBreakdown>> reward_log_;
};

}  // namespace diplomat::env
