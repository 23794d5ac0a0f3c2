#pragma once
// Scripted negotiators: a time-dependent conceder, a classical
// alternating-offers agent, and a uniform-random floor baseline. All outputs
// respect legal_moves for the current protocol state.

#include <random>
#include <set>
#include <vector>

#include "diplomat/domain.hpp"
#include "diplomat/env.hpp"
#include "diplomat/protocol.hpp"

namespace diplomat::baselines {

// Aspiration u*(t) = res + (1 - res)*(1 - (t/T)^(1/beta_c)). beta_c < 1 holds
// firm ("Boulware"), beta_c > 1 concedes early.
double conceder_target(double reservation, int round, int total_rounds, double beta_c);

env::AgentAction conceder_policy(const protocol::ProtocolState& state,
                                 const domain::Scenario& sc, int agent, double beta_c,
                                 const protocol::ProtocolOptions& opts = {});

// Per-episode bookkeeping: deals this agent has already put on the table.
struct AlternatingOffersState {
  std::set<std::vector<int>> proposed;
};

// Turn-taking by round parity over agent ids; linear target decay from 1 to
// the reservation across the budget; never repeats a proposal while an
// unproposed deal above target remains.
env::AgentAction alternating_offers_policy(AlternatingOffersState& mem,
                                           const protocol::ProtocolState& state,
                                           const domain::Scenario& sc, int agent,
                                           const protocol::ProtocolOptions& opts = {});

// Uniform over legal tags, uniform deal indices, uniform concession.
env::AgentAction random_policy(const protocol::ProtocolState& state,
                               const domain::Scenario& sc, int agent, std::mt19937_64& rng,
                               const protocol::ProtocolOptions& opts = {});

}  // namespace diplomat::baselines
