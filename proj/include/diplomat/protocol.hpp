#pragma once
// Progressive negotiation protocol: phased rounds, message legality, standing
// proposals, and termination. Each round all agents submit one message,
// applied in ascending agent-id order.

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diplomat/domain.hpp"

namespace diplomat::protocol {

struct ProtocolViolation : std::runtime_error {
  explicit ProtocolViolation(const std::string& msg) : std::runtime_error(msg) {}
};

struct ProtocolClosed : std::runtime_error {
  explicit ProtocolClosed(const std::string& msg) : std::runtime_error(msg) {}
};

struct OutOfEpisode : std::runtime_error {
  explicit OutOfEpisode(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Phase { Initialization, Exploration, ProposalExchange, Argumentation, Convergence };
constexpr int kNumPhases = 5;

const char* phase_name(Phase p);

enum class Direction { Raise, Lower };

// Number of preference buckets carried by Reveal messages (low/medium/high).
constexpr int kRevealBuckets = 3;

struct Message {
  enum class Tag { Propose, Accept, Reject, Counteroffer, Argue, Reveal, Pass };
  static constexpr int kNumTags = 7;

  Tag tag = Tag::Pass;
  domain::Deal deal;         // Propose, Counteroffer
  int proposal_id = -1;      // Accept, Reject, Counteroffer
  int issue_id = -1;         // Argue, Reveal
  Direction direction = Direction::Raise;  // Argue
  double strength = 0.0;     // Argue, in [0,1]
  int bucket = 0;            // Reveal, in [0, kRevealBuckets)

  static Message propose(domain::Deal d);
  static Message accept(int proposal_id);
  static Message reject(int proposal_id);
  static Message counteroffer(int proposal_id, domain::Deal d);
  static Message argue(int issue_id, Direction dir, double strength);
  static Message reveal(int issue_id, int bucket);
  static Message pass();
};

const char* tag_name(Message::Tag t);

struct Outcome {
  enum class Kind { Agreement, Failure };
  Kind kind = Kind::Failure;
  domain::Deal deal;  // Agreement only
  int round = 0;

  bool agreed() const { return kind == Kind::Agreement; }
};

struct ProposalEntry {
  int id;
  int author;
  domain::Deal deal;
  int round;
};

struct LoggedMessage {
  int round;
  Phase phase;
  int agent;
  Message message;
};

struct ProtocolState {
  int round = 0;
  std::vector<ProposalEntry> proposal_log;
  std::optional<int> standing_proposal;  // id of most recent Propose/Counteroffer
  std::set<int> acceptances;             // agents accepting the standing proposal
  std::vector<LoggedMessage> message_log;
  std::optional<Outcome> terminated;

  bool done() const { return terminated.has_value(); }
  const ProposalEntry& proposal(int id) const;
};

// Phase containing `round` under the cumulative budget schedule.
Phase phase_of(int round, const domain::RoundBudgets& budgets);

// When true, every tag is legal in every phase (protocol ablation); argument
// constraints such as "standing proposal exists" still apply.
struct ProtocolOptions {
  bool phase_free = false;
};

std::set<Message::Tag> legal_moves(const ProtocolState& state, const domain::Scenario& sc,
                                   int agent, const ProtocolOptions& opts = {});

// Tag legality plus argument validity; empty string means valid.
std::string message_error(const ProtocolState& state, const domain::Scenario& sc, int agent,
                          const Message& msg, const ProtocolOptions& opts = {});

// Applies one message in place. Throws ProtocolViolation on an illegal
// message and ProtocolClosed on a terminated state.
void apply_message(ProtocolState& state, const domain::Scenario& sc, int agent,
                   const Message& msg, const ProtocolOptions& opts = {});

// Ends the current round: advances the counter and declares Failure when the
// budget is exhausted without agreement.
void end_round(ProtocolState& state, const domain::Scenario& sc);

enum class Status { Ongoing, Agreement, Failure };
Status outcome(const ProtocolState& state);

// Transcript format "diplomat-transcript/1": one JSON line per message, final
// line carries the outcome.
nlohmann::ordered_json message_to_json(const Message& m);
Message message_from_json(const nlohmann::json& j);
nlohmann::ordered_json transcript_line(const LoggedMessage& lm);
nlohmann::ordered_json outcome_line(const Outcome& o);

}  // namespace diplomat::protocol
