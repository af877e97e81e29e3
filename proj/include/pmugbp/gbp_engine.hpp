#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pmugbp/factor_graph.hpp"

namespace pmugbp {

struct MomentMessage {
  Vec mean;
  Mat precision;
};

struct CanonicalMessage {
  Vec eta;
  Mat precision;
};

struct Belief {
  Index variable = 0;
  Vec mean;
  Mat precision;
};

MomentMessage zero_moment(Index dim);
CanonicalMessage zero_canonical(Index dim);
CanonicalMessage to_canonical(const MomentMessage& m);
MomentMessage to_moment(const CanonicalMessage& c, double rcond = kDefaultRcond);

// --- message updates -------------------------------------------------------
//
// Factor-side updates take the incoming variable->factor message of every
// factor position (the entry at `target` is ignored). A neighbour whose
// incoming precision is exactly zero carries no information, and the
// outgoing message is then the zero message.

MomentMessage factor_to_variable(const PairwiseFactor& factor, std::span<const MomentMessage* const> incoming,
                                 Index target, double rcond = kDefaultRcond);

/// Two-variable convenience form: `incoming` comes from the non-target end.
MomentMessage factor_to_variable(const PairwiseFactor& factor, const MomentMessage& incoming, Index target,
                                 double rcond = kDefaultRcond);

CanonicalMessage factor_to_variable_canonical(const PairwiseFactor& factor,
                                              std::span<const CanonicalMessage* const> incoming, Index target,
                                              double rcond = kDefaultRcond);

CanonicalMessage factor_to_variable_canonical(const PairwiseFactor& factor, const CanonicalMessage& incoming,
                                              Index target, double rcond = kDefaultRcond);

/// Product of the given Gaussians (unary contributions and factor messages
/// from every neighbour except the target). The empty product is the zero
/// message.
MomentMessage variable_to_factor(std::span<const MomentMessage* const> incoming, Index dim,
                                 double rcond = kDefaultRcond);

CanonicalMessage variable_to_factor_canonical(std::span<const CanonicalMessage* const> incoming, Index dim);

/// Marginal from every incoming Gaussian; throws SingularBelief when the
/// summed precision is not positive definite.
Belief compute_belief(Index variable, std::span<const MomentMessage* const> incoming, Index dim,
                      double rcond = kDefaultRcond);

Belief compute_belief_canonical(Index variable, std::span<const CanonicalMessage* const> incoming, Index dim,
                                double rcond = kDefaultRcond);

struct BroadcastUpdate {
  std::vector<CanonicalMessage> outgoing;  // one per entry of `edge_incoming`
  Belief belief;
};

/// Aggregates unary and edge messages once, then forms each outgoing message
/// by subtracting the target edge's own contribution.
BroadcastUpdate broadcast_variable_update(Index variable, std::span<const CanonicalMessage* const> unary,
                                          std::span<const CanonicalMessage* const> edge_incoming, Index dim,
                                          double rcond = kDefaultRcond);

/// Same update written into existing message slots, one per edge.
Belief broadcast_variable_update(Index variable, std::span<const CanonicalMessage* const> unary,
                                 std::span<const CanonicalMessage* const> edge_incoming,
                                 std::span<CanonicalMessage* const> outgoing, Index dim,
                                 double rcond = kDefaultRcond);

// --- engine ------------------------------------------------------------------

enum class MessageForm { Moment, Canonical, Broadcast };

const char* to_string(MessageForm form);
MessageForm parse_message_form(const std::string& text);

struct SolverConfig {
  MessageForm form = MessageForm::Canonical;
  int max_iterations = 500;
  double tol_mean = 1e-9;
  double svd_rcond = kDefaultRcond;
  double damping = 0.0;
  bool record_trace = true;

  void validate() const;
};

/// Per-edge messages in both directions. Moment stores use the `moment_*`
/// vectors, canonical stores the `canonical_*` ones.
struct MessageStore {
  bool canonical = false;
  std::vector<MomentMessage> moment_to_factor;
  std::vector<MomentMessage> moment_to_variable;
  std::vector<CanonicalMessage> canonical_to_factor;
  std::vector<CanonicalMessage> canonical_to_variable;

  Index edge_count() const;
  MomentMessage to_factor(Index edge, double rcond = kDefaultRcond) const;
  MomentMessage to_variable(Index edge, double rcond = kDefaultRcond) const;
  MessageStore encoded(bool as_canonical, double rcond = kDefaultRcond) const;
};

/// Variable->factor messages before the first round: the product of the
/// variable's unary factors, or (default_mean, default_precision) for
/// variables without one. Scalar graphs use the matching component.
MessageStore initialize_messages(const FactorGraph& graph, const Vec2& default_mean = Vec2(1.0, 0.0),
                                 const Mat2& default_precision = Mat2::Identity() * 1e-8);

struct IterationRecord {
  int iteration = 0;
  std::vector<Belief> beliefs;
  double max_delta = std::numeric_limits<double>::infinity();
};

using IterationTrace = std::vector<IterationRecord>;

struct RunResult {
  std::vector<Belief> beliefs;
  IterationTrace trace;
  bool converged = false;
  int iterations = 0;
};

/// Synchronous GBP over a graph it owns. Each round computes all
/// factor->variable messages from the previous variable->factor messages,
/// then the beliefs, then all variable->factor messages.
class GbpEngine {
 public:
  GbpEngine(FactorGraph graph, SolverConfig config, const MessageStore& initial);

  /// One synchronous round.
  const IterationRecord& step();
  RunResult run();

  bool converged() const { return last_.max_delta < config_.tol_mean; }
  int iteration() const { return last_.iteration; }
  const IterationRecord& last() const { return last_; }
  const IterationTrace& trace() const { return trace_; }

  const FactorGraph& graph() const { return graph_; }
  FactorGraph& graph() { return graph_; }
  const SolverConfig& config() const { return config_; }
  const MessageStore& messages() const { return store_; }
  MessageStore& messages() { return store_; }

  /// Recomputes the outgoing variable->factor messages of one variable from
  /// its current unary factors and the latest factor->variable messages.
  void refresh_outgoing(Index variable);

 private:
  void factor_phase();
  void belief_and_variable_phase(std::vector<Belief>& beliefs);
  void variable_messages_moment(const VariableNode& v, std::vector<MomentMessage>& out);
  void variable_messages_canonical(const VariableNode& v, std::vector<CanonicalMessage>& out);

  FactorGraph graph_;
  SolverConfig config_;
  MessageStore store_;
  IterationRecord last_;
  IterationTrace trace_;
};

RunResult run(const FactorGraph& graph, const SolverConfig& config, const MessageStore& initial);

/// Bus voltage estimates [re, im] assembled from variable beliefs.
std::vector<Vec2> bus_estimates(const FactorGraph& graph, const std::vector<Belief>& beliefs);

}  // namespace pmugbp
