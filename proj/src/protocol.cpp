#include "diplomat/protocol.hpp"

namespace diplomat::protocol {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Initialization: return "initialization";
    case Phase::Exploration: return "exploration";
    case Phase::ProposalExchange: return "proposal_exchange";
    case Phase::Argumentation: return "argumentation";
    case Phase::Convergence: return "convergence";
  }
  return "?";
}

const char* tag_name(Message::Tag t) {
  switch (t) {
    case Message::Tag::Propose: return "propose";
    case Message::Tag::Accept: return "accept";
    case Message::Tag::Reject: return "reject";
    case Message::Tag::Counteroffer: return "counteroffer";
    case Message::Tag::Argue: return "argue";
    case Message::Tag::Reveal: return "reveal";
    case Message::Tag::Pass: return "pass";
  }
  return "?";
}

Message Message::propose(domain::Deal d) {
  Message m;
  m.tag = Tag::Propose;
  m.deal = std::move(d);
  return m;
}

Message Message::accept(int proposal_id) {
  Message m;
  m.tag = Tag::Accept;
  m.proposal_id = proposal_id;
  return m;
}

Message Message::reject(int proposal_id) {
  Message m;
  m.tag = Tag::Reject;
  m.proposal_id = proposal_id;
  return m;
}

Message Message::counteroffer(int proposal_id, domain::Deal d) {
  Message m;
  m.tag = Tag::Counteroffer;
  m.proposal_id = proposal_id;
  m.deal = std::move(d);
  return m;
}

Message Message::argue(int issue_id, Direction dir, double strength) {
  Message m;
  m.tag = Tag::Argue;
  m.issue_id = issue_id;
  m.direction = dir;
  m.strength = strength;
  return m;
}

Message Message::reveal(int issue_id, int bucket) {
  Message m;
  m.tag = Tag::Reveal;
  m.issue_id = issue_id;
  m.bucket = bucket;
  return m;
}

Message Message::pass() { return Message{}; }

const ProposalEntry& ProtocolState::proposal(int id) const {
  for (const auto& p : proposal_log)
    if (p.id == id) return p;
  throw ProtocolViolation("unknown proposal id " + std::to_string(id));
}

Phase phase_of(int round, const domain::RoundBudgets& budgets) {
  if (round < 0 || round >= budgets.total())
    throw OutOfEpisode("round " + std::to_string(round) + " outside budget " +
                       std::to_string(budgets.total()));
  int acc = 0;
  for (int p = 0; p < kNumPhases; ++p) {
    acc += budgets.rounds[p];
    if (round < acc) return static_cast<Phase>(p);
  }
  throw OutOfEpisode("unreachable");
}

namespace {

bool has_foreign_standing(const ProtocolState& state, int agent) {
  if (!state.standing_proposal) return false;
  return state.proposal(*state.standing_proposal).author != agent;
}

}  // namespace

std::set<Message::Tag> legal_moves(const ProtocolState& state, const domain::Scenario& sc,
                                   int agent, const ProtocolOptions& opts) {
  using Tag = Message::Tag;
  if (state.done()) throw ProtocolClosed("legal_moves on terminated state");
  if (agent < 0 || agent >= sc.num_agents)
    throw ProtocolViolation("agent " + std::to_string(agent) + " out of range");

  bool responder = has_foreign_standing(state, agent);
  std::set<Tag> moves{Tag::Pass};
  auto add_phase_tags = [&](Phase phase) {
    switch (phase) {
      case Phase::Initialization:
        moves.insert(Tag::Reveal);
        break;
      case Phase::Exploration:
        moves.insert(Tag::Reveal);
        moves.insert(Tag::Argue);
        break;
      case Phase::ProposalExchange:
        moves.insert(Tag::Propose);
        if (responder) {
          moves.insert(Tag::Accept);
          moves.insert(Tag::Reject);
          moves.insert(Tag::Counteroffer);
        }
        break;
      case Phase::Argumentation:
        moves.insert(Tag::Argue);
        if (responder) {
          moves.insert(Tag::Accept);
          moves.insert(Tag::Reject);
        }
        break;
      case Phase::Convergence:
        if (responder) {
          moves.insert(Tag::Accept);
          moves.insert(Tag::Counteroffer);
        }
        break;
    }
  };
  if (opts.phase_free) {
    for (int p = 0; p < kNumPhases; ++p) add_phase_tags(static_cast<Phase>(p));
  } else {
    add_phase_tags(phase_of(state.round, sc.budgets));
  }
  return moves;
}

std::string message_error(const ProtocolState& state, const domain::Scenario& sc, int agent,
                          const Message& msg, const ProtocolOptions& opts) {
  using Tag = Message::Tag;
  auto legal = legal_moves(state, sc, agent, opts);
  if (!legal.count(msg.tag)) {
    return std::string("tag ") + tag_name(msg.tag) + " not legal for agent " +
           std::to_string(agent) + " in phase " +
           phase_name(phase_of(state.round, sc.budgets));
  }
  switch (msg.tag) {
    case Tag::Propose:
    case Tag::Counteroffer:
      if (!sc.deal_valid(msg.deal)) return "invalid deal";
      if (msg.tag == Tag::Counteroffer && msg.proposal_id != *state.standing_proposal)
        return "counteroffer must target the standing proposal";
      break;
    case Tag::Accept:
    case Tag::Reject:
      if (msg.proposal_id != *state.standing_proposal)
        return std::string(tag_name(msg.tag)) + " must target the standing proposal";
      break;
    case Tag::Argue:
      if (msg.issue_id < 0 || msg.issue_id >= sc.num_issues()) return "argue issue out of range";
      if (msg.strength < 0.0 || msg.strength > 1.0) return "argue strength outside [0,1]";
      break;
    case Tag::Reveal:
      if (msg.issue_id < 0 || msg.issue_id >= sc.num_issues()) return "reveal issue out of range";
      if (msg.bucket < 0 || msg.bucket >= kRevealBuckets) return "reveal bucket out of range";
      break;
    case Tag::Pass:
      break;
  }
  return {};
}

void apply_message(ProtocolState& state, const domain::Scenario& sc, int agent,
                   const Message& msg, const ProtocolOptions& opts) {
  using Tag = Message::Tag;
  if (state.done()) throw ProtocolClosed("apply_message on terminated state");
  std::string err = message_error(state, sc, agent, msg, opts);
  if (!err.empty())
    throw ProtocolViolation("agent " + std::to_string(agent) + ": " + err);

  Phase phase = phase_of(state.round, sc.budgets);
  state.message_log.push_back({state.round, phase, agent, msg});

  switch (msg.tag) {
    case Tag::Propose:
    case Tag::Counteroffer: {
      int id = static_cast<int>(state.proposal_log.size());
      state.proposal_log.push_back({id, agent, msg.deal, state.round});
      state.standing_proposal = id;
      state.acceptances.clear();
      state.acceptances.insert(agent);  // author auto-accepts
      if (static_cast<int>(state.acceptances.size()) == sc.num_agents)
        state.terminated = Outcome{Outcome::Kind::Agreement, msg.deal, state.round};
      break;
    }
    case Tag::Accept: {
      state.acceptances.insert(agent);
      if (static_cast<int>(state.acceptances.size()) == sc.num_agents) {
        const auto& p = state.proposal(*state.standing_proposal);
        state.terminated = Outcome{Outcome::Kind::Agreement, p.deal, state.round};
      }
      break;
    }
    case Tag::Reject:
      state.standing_proposal.reset();  // proposal stays in the log
      state.acceptances.clear();
      break;
    case Tag::Argue:
    case Tag::Reveal:
    case Tag::Pass:
      break;
  }
}

void end_round(ProtocolState& state, const domain::Scenario& sc) {
  if (state.done()) return;
  ++state.round;
  if (state.round >= sc.budgets.total())
    state.terminated = Outcome{Outcome::Kind::Failure, {}, state.round};
}

Status outcome(const ProtocolState& state) {
  if (!state.terminated) return Status::Ongoing;
  return state.terminated->agreed() ? Status::Agreement : Status::Failure;
}

nlohmann::ordered_json message_to_json(const Message& m) {
  using Tag = Message::Tag;
  nlohmann::ordered_json j;
  j["tag"] = tag_name(m.tag);
  switch (m.tag) {
    case Tag::Propose:
      j["deal"] = m.deal.values;
      break;
    case Tag::Counteroffer:
      j["proposal_id"] = m.proposal_id;
      j["deal"] = m.deal.values;
      break;
    case Tag::Accept:
    case Tag::Reject:
      j["proposal_id"] = m.proposal_id;
      break;
    case Tag::Argue:
      j["issue_id"] = m.issue_id;
      j["direction"] = m.direction == Direction::Raise ? "raise" : "lower";
      j["strength"] = m.strength;
      break;
    case Tag::Reveal:
      j["issue_id"] = m.issue_id;
      j["bucket"] = m.bucket;
      break;
    case Tag::Pass:
      break;
  }
  return j;
}

Message message_from_json(const nlohmann::json& j) {
  std::string tag = j.at("tag").get<std::string>();
  if (tag == "propose") return Message::propose({j.at("deal").get<std::vector<int>>()});
  if (tag == "counteroffer")
    return Message::counteroffer(j.at("proposal_id").get<int>(),
                                 {j.at("deal").get<std::vector<int>>()});
  if (tag == "accept") return Message::accept(j.at("proposal_id").get<int>());
  if (tag == "reject") return Message::reject(j.at("proposal_id").get<int>());
  if (tag == "argue")
    return Message::argue(j.at("issue_id").get<int>(),
                          j.at("direction").get<std::string>() == "raise" ? Direction::Raise
                                                                          : Direction::Lower,
                          j.at("strength").get<double>());
  if (tag == "reveal") return Message::reveal(j.at("issue_id").get<int>(), j.at("bucket").get<int>());
  if (tag == "pass") return Message::pass();
  throw ProtocolViolation("unknown message tag: " + tag);
}

nlohmann::ordered_json transcript_line(const LoggedMessage& lm) {
  nlohmann::ordered_json j;
  j["round"] = lm.round;
  j["phase"] = phase_name(lm.phase);
  j["agent"] = lm.agent;
  j["message"] = message_to_json(lm.message);
  return j;
}

nlohmann::ordered_json outcome_line(const Outcome& o) {
  nlohmann::ordered_json j;
  j["outcome"] = o.agreed() ? "agreement" : "failure";
  j["round"] = o.round;
  if (o.agreed()) j["deal"] = o.deal.values;
  return j;
}

}  // namespace diplomat::protocol
