#include "diplomat/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace diplomat::baselines {

using protocol::Message;
using Tag = protocol::Message::Tag;

namespace {

double standing_utility(const protocol::ProtocolState& state, const domain::Scenario& sc,
                        int agent) {
  return domain::utility(sc, agent, state.proposal(*state.standing_proposal).deal);
}

domain::Deal own_best(const domain::Scenario& sc, int agent) {
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

double conceder_target(double reservation, int round, int total_rounds, double beta_c) {
  double frac = total_rounds > 0 ? static_cast<double>(round) / total_rounds : 1.0;
  frac = std::clamp(frac, 0.0, 1.0);
  return reservation + (1.0 - reservation) * (1.0 - std::pow(frac, 1.0 / beta_c));
}

env::AgentAction conceder_policy(const protocol::ProtocolState& state,
                                 const domain::Scenario& sc, int agent, double beta_c,
                                 const protocol::ProtocolOptions& opts) {
  env::AgentAction a;
  auto legal = protocol::legal_moves(state, sc, agent, opts);
  int total = sc.budgets.total();
  double res = sc.profiles[agent].reservation;
  double target = conceder_target(res, state.round, total, beta_c);
  a.concession = std::pow(std::clamp(static_cast<double>(state.round) / total, 0.0, 1.0),
                          1.0 / beta_c);

  if (state.standing_proposal && legal.count(Tag::Accept) &&
      standing_utility(state, sc, agent) >= target - 1e-12) {
    a.tag = Tag::Accept;
    return a;
  }
  if (legal.count(Tag::Counteroffer)) {
    a.tag = Tag::Counteroffer;
    return a;
  }
  if (legal.count(Tag::Propose)) {
    a.tag = Tag::Propose;
    return a;
  }
  // never Reject: a live standing proposal is what makes convergence-phase
  // counteroffers (and late acceptance) possible
  a.tag = Tag::Pass;
  return a;
}

env::AgentAction alternating_offers_policy(AlternatingOffersState& mem,
                                           const protocol::ProtocolState& state,
                                           const domain::Scenario& sc, int agent,
                                           const protocol::ProtocolOptions& opts) {
  env::AgentAction a;
  auto legal = protocol::legal_moves(state, sc, agent, opts);
  int total = sc.budgets.total();
  double res = sc.profiles[agent].reservation;
  double frac = std::clamp(static_cast<double>(state.round) / total, 0.0, 1.0);
  double target = 1.0 - frac * (1.0 - res);
  bool my_turn = state.round % sc.num_agents == agent;

  bool responder = false;
  if (state.standing_proposal &&
      state.proposal(*state.standing_proposal).author != agent)
    responder = true;

  if (responder && legal.count(Tag::Accept) &&
      standing_utility(state, sc, agent) >= target - 1e-12) {
    a.tag = Tag::Accept;
    return a;
  }
  if (!my_turn) {
    if (responder && legal.count(Tag::Reject)) a.tag = Tag::Reject;
    return a;
  }
  if (!legal.count(Tag::Propose) && !legal.count(Tag::Counteroffer)) {
    if (responder && legal.count(Tag::Reject)) a.tag = Tag::Reject;
    return a;
  }

  domain::Deal pickd;
  if (sc.deal_space_size() <= 100'000) {
    // best unproposed deal at/above target; repeats allowed only once the
    // above-target alternatives are exhausted
    auto deals = domain::enumerate_deals(sc);
    const domain::Deal* best = nullptr;
    double best_u = -1;
    for (const auto& d : deals) {
      double u = domain::utility(sc, agent, d);
      if (u + 1e-12 < target) continue;
      if (mem.proposed.count(d.values)) continue;
      if (u > best_u + 1e-12) {
        best_u = u;
        best = &d;
      }
    }
    pickd = best ? *best : own_best(sc, agent);
  } else {
    pickd = own_best(sc, agent);
  }
  mem.proposed.insert(pickd.values);
  a.tag = legal.count(Tag::Propose) ? Tag::Propose : Tag::Counteroffer;
  a.explicit_deal = pickd;
  a.concession = frac;
  return a;
}

env::AgentAction random_policy(const protocol::ProtocolState& state,
                               const domain::Scenario& sc, int agent, std::mt19937_64& rng,
                               const protocol::ProtocolOptions& opts) {
  env::AgentAction a;
  auto legal = protocol::legal_moves(state, sc, agent, opts);
  std::vector<Tag> tags(legal.begin(), legal.end());
  std::uniform_int_distribution<std::size_t> pick_tag(0, tags.size() - 1);
  a.tag = tags[pick_tag(rng)];
  domain::Deal d;
  for (int m = 0; m < sc.num_issues(); ++m) {
    std::uniform_int_distribution<int> pick_v(0, sc.issues[m].num_values - 1);
    int v = pick_v(rng);
    a.deal_choice.push_back(v);
    d.values.push_back(v);
  }
  if (a.tag == Tag::Propose || a.tag == Tag::Counteroffer) a.explicit_deal = d;
  a.concession = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return a;
}

}  // namespace diplomat::baselines
