#include "diplomat/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diplomat::env {

using protocol::Message;
using Tag = protocol::Message::Tag;

ObservationLayout ObservationLayout::of(const domain::Scenario& sc) {
  ObservationLayout l;
  l.num_agents = sc.num_agents;
  l.num_issues = sc.num_issues();
  for (const auto& is : sc.issues) l.sum_values += is.num_values;
  return l;
}

int ObservationLayout::length() const {
  return num_issues + 1 + protocol::kNumPhases + 1 + sum_values + 1 +
         (num_agents - 1) * (per_opponent_behavior() + per_opponent_belief());
}

namespace {

// Opponent-welfare objective for proposal search: mean belief-expected
// utility over the other agents.
double opponent_welfare(const domain::Scenario& sc, int agent,
                        const rewards::BeliefState& beliefs, const domain::Deal& deal) {
  double acc = 0;
  int n = 0;
  for (int j = 0; j < sc.num_agents; ++j) {
    if (j == agent) continue;
    acc += rewards::belief_expected_utility(beliefs.about[j], sc, deal);
    ++n;
  }
  return n > 0 ? acc / n : 0.0;
}

domain::Deal own_best_deal(const domain::Scenario& sc, int agent) {
  const auto& p = sc.profiles[agent];
  domain::Deal d;
  for (int m = 0; m < sc.num_issues(); ++m) {
    int best = 0;
    for (int k = 1; k < sc.issues[m].num_values; ++k)
      if (p.valuations[m][k] > p.valuations[m][best]) best = k;
    d.values.push_back(best);
  }
  return d;
}

}  // namespace

domain::Deal target_utility_deal(const domain::Scenario& sc, int agent, double concession,
                                 const rewards::BeliefState& beliefs,
                                 std::uint64_t search_cutoff) {
  const auto& profile = sc.profiles[agent];
  double target = 1.0 - concession * (1.0 - profile.reservation);

  if (sc.deal_space_size() <= search_cutoff &&
      sc.deal_space_size() <= domain::kEnumerationLimit) {
    auto deals = domain::enumerate_deals(sc);
    const domain::Deal* best = nullptr;
    double best_welfare = -1;
    const domain::Deal* fallback = nullptr;
    double fallback_util = -1;
    for (const auto& d : deals) {  // lexicographic order; strict > keeps lowest
      double u = domain::utility(sc, agent, d);
      if (u > fallback_util + 1e-12) {
        fallback_util = u;
        fallback = &d;
      }
      if (u + 1e-12 < target) continue;
      double w = opponent_welfare(sc, agent, beliefs, d);
      if (w > best_welfare + 1e-12) {
        best_welfare = w;
        best = &d;
      }
    }
    return best ? *best : *fallback;
  }

  // Greedy relaxation: start from the own-best deal and, issue by issue,
  // move to the grid value with the best opponent welfare that keeps total
  // own utility at or above target.
  domain::Deal deal = own_best_deal(sc, agent);
  double util = domain::utility(sc, agent, deal);
  for (int m = 0; m < sc.num_issues(); ++m) {
    int cur = deal.values[m];
    double cur_contrib = profile.weights[m] * profile.valuations[m][cur];
    int best_k = cur;
    double best_w = -1;
    for (int k = 0; k < sc.issues[m].num_values; ++k) {
      double new_util = util - cur_contrib + profile.weights[m] * profile.valuations[m][k];
      if (new_util + 1e-12 < target) continue;
      domain::Deal trial = deal;
      trial.values[m] = k;
      double w = opponent_welfare(sc, agent, beliefs, trial);
      if (w > best_w + 1e-12) {
        best_w = w;
        best_k = k;
      }
    }
    util = util - cur_contrib + profile.weights[m] * profile.valuations[m][best_k];
    deal.values[m] = best_k;
  }
  return deal;
}

Env::Env(domain::Scenario sc, EnvConfig cfg, std::uint64_t seed)
    : scenario_(std::move(sc)), cfg_(cfg), seed_(seed), layout_(ObservationLayout::of(scenario_)) {
  scenario_.validate();
  reset();
}

const std::vector<Observation>& Env::reset() {
  state_ = protocol::ProtocolState{};
  beliefs_.clear();
  for (int i = 0; i < scenario_.num_agents; ++i)
    beliefs_.push_back(
        rewards::BeliefState::uniform(scenario_.num_agents, scenario_.num_issues(), i));
  behavior_.assign(scenario_.num_agents, {});
  reveal_counts_.assign(scenario_.num_agents, 0);
  reward_log_.clear();
  observations_.clear();
  for (int i = 0; i < scenario_.num_agents; ++i) observations_.push_back(build_observation(i));
  return observations_;
}

std::vector<std::uint8_t> Env::illegal_tag_mask(int agent) const {
  auto legal = protocol::legal_moves(state_, scenario_, agent, cfg_.protocol_opts);
  std::vector<std::uint8_t> mask(Message::kNumTags, 1);
  for (Tag t : legal) mask[static_cast<int>(t)] = 0;
  return mask;
}

Observation pad_observation(const Observation& obs, const domain::Scenario& sc,
                            int pad_agents, const std::vector<int>& pad_values) {
  int N = sc.num_agents, M = sc.num_issues();
  int Mp = static_cast<int>(pad_values.size());
  if (pad_agents < N || Mp < M)
    throw domain::ScenarioError("pad shape smaller than scenario shape");
  for (int m = 0; m < M; ++m)
    if (sc.issues[m].num_values > pad_values[m])
      throw domain::ScenarioError("pad shape smaller than scenario shape");
  ObservationLayout actual = ObservationLayout::of(sc);
  if (static_cast<int>(obs.size()) != actual.length())
    throw domain::ScenarioError("observation does not match scenario layout");

  int sum_vp = 0;
  for (int v : pad_values) sum_vp += v;
  int bw = actual.per_opponent_behavior();
  int B = protocol::kRevealBuckets;
  Observation out(Mp + 1 + protocol::kNumPhases + 1 + sum_vp + 1 +
                      (pad_agents - 1) * (bw + B * Mp),
                  0.0);

  auto src = obs.begin();
  auto copy_n = [&](int dst, int n) { std::copy(src, src + n, out.begin() + dst); src += n; };
  copy_n(0, M);                       // own weights
  copy_n(Mp, 1 + protocol::kNumPhases + 1);  // reservation, phase, round fraction
  int dst = Mp + 1 + protocol::kNumPhases + 1;
  for (int m = 0; m < Mp; ++m) {      // standing deal one-hot, per-issue blocks
    if (m < M) copy_n(dst, sc.issues[m].num_values);
    dst += pad_values[m];
  }
  copy_n(dst, 1);                     // own utility of standing
  dst += 1;
  for (int o = 0; o < N - 1; ++o) copy_n(dst + o * bw, bw);
  dst += (pad_agents - 1) * bw;
  for (int o = 0; o < N - 1; ++o) {
    int opp_dst = dst + o * B * Mp;
    for (int m = 0; m < M; ++m) copy_n(opp_dst + m * B, B);
  }
  return out;
}

Message Env::decode_action(int agent, const AgentAction& action,
                           bool* illegal_substituted) const {
  const auto& profile = scenario_.profiles[agent];
  int M = scenario_.num_issues();
  Message msg = Message::pass();
  bool constructible = true;
  auto valid_deal = [&](const domain::Deal& d) {
    if (static_cast<int>(d.values.size()) != M) return false;
    for (int m = 0; m < M; ++m)
      if (d.values[m] < 0 || d.values[m] >= scenario_.issues[m].num_values) return false;
    return true;
  };
  auto proposal_deal = [&]() {
    if (action.explicit_deal && valid_deal(*action.explicit_deal)) return *action.explicit_deal;
    return target_utility_deal(scenario_, agent, action.concession, beliefs_[agent],
                               cfg_.deal_search_cutoff);
  };
  switch (action.tag) {
    case Tag::Propose:
      msg = Message::propose(proposal_deal());
      break;
    case Tag::Counteroffer:
      if (!state_.standing_proposal) {
        constructible = false;
        break;
      }
      msg = Message::counteroffer(*state_.standing_proposal, proposal_deal());
      break;
    case Tag::Accept:
    case Tag::Reject:
      if (!state_.standing_proposal) {
        constructible = false;
        break;
      }
      msg = action.tag == Tag::Accept ? Message::accept(*state_.standing_proposal)
                                      : Message::reject(*state_.standing_proposal);
      break;
    case Tag::Argue: {
      // argue for the own-preferred direction on the highest-weight issue
      int issue = 0;
      for (int m = 1; m < M; ++m)
        if (profile.weights[m] > profile.weights[issue]) issue = m;
      bool increasing = profile.valuations[issue].back() >= profile.valuations[issue].front();
      double strength = std::clamp(profile.weights[issue] * M, 0.0, 1.0);
      msg = Message::argue(issue, increasing ? protocol::Direction::Raise
                                             : protocol::Direction::Lower,
                           strength);
      break;
    }
    case Tag::Reveal: {
      // truthful reveal, cycling through issues
      int issue = reveal_counts_[agent] % M;
      msg = Message::reveal(issue, rewards::weight_bucket_of(profile.weights[issue], M));
      break;
    }
    case Tag::Pass:
      break;
  }
  bool illegal = !constructible ||
                 !protocol::message_error(state_, scenario_, agent, msg, cfg_.protocol_opts)
                      .empty();
  if (illegal) msg = Message::pass();
  if (illegal_substituted) *illegal_substituted = illegal;
  return msg;
}

double Env::estimated_joint_welfare(int agent, const domain::Deal& deal) const {
  double acc = domain::utility(scenario_, agent, deal);
  for (int j = 0; j < scenario_.num_agents; ++j)
    if (j != agent)
      acc += rewards::belief_expected_utility(beliefs_[agent].about[j], scenario_, deal);
  return acc;
}

StepResult Env::step(const std::vector<AgentAction>& joint_actions) {
  if (state_.done()) throw protocol::ProtocolClosed("step on finished episode");
  if (static_cast<int>(joint_actions.size()) != scenario_.num_agents)
    throw std::invalid_argument("one action per agent required");

  int N = scenario_.num_agents;
  protocol::Phase phase_played = protocol::phase_of(state_.round, scenario_.budgets);

  std::vector<double> entropy_before(N);
  for (int i = 0; i < N; ++i) entropy_before[i] = beliefs_[i].entropy();

  std::vector<bool> illegal(N, false), improved(N, false);
  std::vector<int> accepts_for_author(N, 0);

  for (int agent = 0; agent < N && !state_.done(); ++agent) {
    bool was_illegal = false;
    Message msg = decode_action(agent, joint_actions[agent], &was_illegal);
    illegal[agent] = was_illegal;

    // joint-welfare improvement check against the previous standing proposal
    if ((msg.tag == Tag::Propose || msg.tag == Tag::Counteroffer) && state_.standing_proposal) {
      const auto& prev = state_.proposal(*state_.standing_proposal).deal;
      improved[agent] =
          estimated_joint_welfare(agent, msg.deal) >
          estimated_joint_welfare(agent, prev) + 1e-12;
    }

    const domain::Deal* referenced = nullptr;
    domain::Deal referenced_copy;
    if ((msg.tag == Tag::Accept || msg.tag == Tag::Reject) && state_.standing_proposal) {
      referenced_copy = state_.proposal(*state_.standing_proposal).deal;
      referenced = &referenced_copy;
    }
    int standing_author =
        state_.standing_proposal ? state_.proposal(*state_.standing_proposal).author : -1;

    protocol::apply_message(state_, scenario_, agent, msg, cfg_.protocol_opts);

    if (msg.tag == Tag::Accept && standing_author >= 0 && standing_author != agent)
      ++accepts_for_author[standing_author];
    if (msg.tag == Tag::Reveal) ++reveal_counts_[agent];

    // everyone else updates their model of the acting agent
    for (int o = 0; o < N; ++o)
      if (o != agent)
        rewards::update_belief(beliefs_[o].about[agent], msg, scenario_, referenced,
                               cfg_.shaping);

    auto& summary = behavior_[agent];
    summary.has_message = true;
    summary.last_tag = msg.tag;
    if (msg.tag == Tag::Argue) {
      summary.argue_direction = msg.direction == protocol::Direction::Raise ? 1.0 : -1.0;
      summary.argue_strength = msg.strength;
    }
  }

  if (!state_.done()) protocol::end_round(state_, scenario_);

  bool agreed = state_.done() && state_.terminated->agreed();
  int standing_author =
      state_.standing_proposal ? state_.proposal(*state_.standing_proposal).author : -1;

  std::vector<rewards::RewardBreakdown> step_rewards(N);
  for (int i = 0; i < N; ++i) {
    const auto& profile = scenario_.profiles[i];
    double out = 0;
    if (state_.done()) {
      double u = agreed ? domain::utility(scenario_, i, state_.terminated->deal)
                        : profile.reservation;
      out = rewards::outcome_reward(u, profile.reservation, agreed);
    }
    rewards::ProcessContext ctx;
    ctx.illegal_substituted = illegal[i];
    ctx.improved_joint_welfare = improved[i];
    ctx.phase = phase_played;
    double proc = rewards::process_reward(ctx, cfg_.shaping);
    double soc = rewards::social_reward(accepts_for_author[i], N - 1, standing_author == i,
                                        cfg_.shaping);
    double intr = rewards::intrinsic_reward(entropy_before[i], beliefs_[i].entropy());
    step_rewards[i] = rewards::total_reward(out, proc, soc, intr, cfg_.reward_weights);
  }
  reward_log_.push_back(step_rewards);

  for (int i = 0; i < N; ++i) observations_[i] = build_observation(i);

  StepResult res;
  res.observations = observations_;
  res.rewards = std::move(step_rewards);
  res.done = state_.done();
  return res;
}

Observation Env::build_observation(int agent) const {
  const auto& profile = scenario_.profiles[agent];
  int M = scenario_.num_issues();
  int total = scenario_.budgets.total();
  Observation obs;
  obs.reserve(layout_.length());

  for (double w : profile.weights) obs.push_back(w);
  obs.push_back(profile.reservation);

  int display_round = std::min(state_.round, total - 1);
  protocol::Phase phase = protocol::phase_of(display_round, scenario_.budgets);
  for (int p = 0; p < protocol::kNumPhases; ++p)
    obs.push_back(p == static_cast<int>(phase) ? 1.0 : 0.0);
  obs.push_back(static_cast<double>(state_.round) / total);

  const domain::Deal* standing = nullptr;
  if (state_.standing_proposal) standing = &state_.proposal(*state_.standing_proposal).deal;
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < scenario_.issues[m].num_values; ++k)
      obs.push_back(standing && standing->values[m] == k ? 1.0 : 0.0);
  obs.push_back(standing ? domain::utility(scenario_, agent, *standing) : 0.0);

  for (int j = 0; j < scenario_.num_agents; ++j) {
    if (j == agent) continue;
    const auto& s = behavior_[j];
    for (int t = 0; t < Message::kNumTags; ++t)
      obs.push_back(s.has_message && t == static_cast<int>(s.last_tag) ? 1.0 : 0.0);
    obs.push_back(s.argue_direction);
    obs.push_back(s.argue_strength);
    obs.push_back(state_.acceptances.count(j) ? 1.0 : 0.0);
  }
  for (int j = 0; j < scenario_.num_agents; ++j) {
    if (j == agent) continue;
    for (const auto& row : beliefs_[agent].about[j].weight_buckets)
      for (double p : row) obs.push_back(p);
  }
  return obs;
}

EpisodeResult Env::result() const {
  if (!state_.done()) throw std::logic_error("result() before episode end");
  EpisodeResult r;
  r.outcome = *state_.terminated;
  bool agreed = r.outcome.agreed();
  for (int i = 0; i < scenario_.num_agents; ++i)
    r.final_utilities.push_back(agreed ? domain::utility(scenario_, i, r.outcome.deal)
                                       : scenario_.profiles[i].reservation);
  r.rounds_used = agreed ? r.outcome.round + 1 : scenario_.budgets.total();
  r.transcript = state_.message_log;
  r.reward_log = reward_log_;
  return r;
}

}  // namespace diplomat::env
