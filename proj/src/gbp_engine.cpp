#include "pmugbp/gbp_engine.hpp"

#include <algorithm>
#include <cmath>

namespace pmugbp {

const char* to_string(MessageForm form) {
  switch (form) {
    case MessageForm::Moment: return "moment";
    case MessageForm::Canonical: return "canonical";
    case MessageForm::Broadcast: return "broadcast";
  }
  return "?";
}

MessageForm parse_message_form(const std::string& text) {
  if (text == "moment") return MessageForm::Moment;
  if (text == "canonical") return MessageForm::Canonical;
  if (text == "broadcast") return MessageForm::Broadcast;
  throw Error(Errc::InvalidInput, "unknown message form '" + text + "'");
}

void SolverConfig::validate() const {
  if (max_iterations < 1) throw Error(Errc::InvalidInput, "max_iterations must be at least 1");
  if (!(tol_mean > 0.0)) throw Error(Errc::InvalidInput, "tol_mean must be positive");
  if (!(svd_rcond > 0.0 && svd_rcond < 1.0)) throw Error(Errc::InvalidInput, "svd_rcond must lie in (0, 1)");
  if (!(damping >= 0.0 && damping < 1.0)) throw Error(Errc::InvalidInput, "damping must lie in [0, 1)");
}

Index MessageStore::edge_count() const {
  return static_cast<Index>(canonical ? canonical_to_factor.size() : moment_to_factor.size());
}

MomentMessage MessageStore::to_factor(Index edge, double rcond) const {
  const auto e = static_cast<std::size_t>(edge);
  return canonical ? to_moment(canonical_to_factor.at(e), rcond) : moment_to_factor.at(e);
}

MomentMessage MessageStore::to_variable(Index edge, double rcond) const {
  const auto e = static_cast<std::size_t>(edge);
  return canonical ? to_moment(canonical_to_variable.at(e), rcond) : moment_to_variable.at(e);
}

MessageStore MessageStore::encoded(bool as_canonical, double rcond) const {
  if (as_canonical == canonical) return *this;
  MessageStore out;
  out.canonical = as_canonical;
  if (as_canonical) {
    for (const auto& m : moment_to_factor) out.canonical_to_factor.push_back(to_canonical(m));
    for (const auto& m : moment_to_variable) out.canonical_to_variable.push_back(to_canonical(m));
  } else {
    for (const auto& c : canonical_to_factor) out.moment_to_factor.push_back(to_moment(c, rcond));
    for (const auto& c : canonical_to_variable) out.moment_to_variable.push_back(to_moment(c, rcond));
  }
  return out;
}

MessageStore initialize_messages(const FactorGraph& graph, const Vec2& default_mean, const Mat2& default_precision) {
  std::vector<MomentMessage> start(graph.variables.size());
  for (const auto& v : graph.variables) {
    auto& msg = start[static_cast<std::size_t>(v.id)];
    if (v.unary.empty()) {
      if (v.component >= 0) {
        msg.mean = Vec::Constant(1, default_mean(v.component));
        msg.precision = Mat::Constant(1, 1, default_precision(v.component, v.component));
      } else {
        msg.mean = default_mean;
        msg.precision = default_precision;
      }
      continue;
    }
    std::vector<MomentMessage> unary;
    std::vector<const MomentMessage*> ptrs;
    unary.reserve(v.unary.size());
    for (Index u : v.unary) {
      const auto& f = graph.unary[static_cast<std::size_t>(u)];
      unary.push_back({f.z, f.lambda});
    }
    for (const auto& m : unary) ptrs.push_back(&m);
    msg = unary.size() == 1 ? unary.front() : variable_to_factor(ptrs, v.dim);
  }

  MessageStore store;
  store.moment_to_factor.reserve(graph.edges.size());
  store.moment_to_variable.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    const auto& msg = start[static_cast<std::size_t>(e.variable)];
    store.moment_to_factor.push_back(msg);
    store.moment_to_variable.push_back(zero_moment(msg.mean.size()));
  }
  return store;
}

GbpEngine::GbpEngine(FactorGraph graph, SolverConfig config, const MessageStore& initial)
    : graph_(std::move(graph)), config_(config) {
  config_.validate();
  store_ = initial.encoded(config_.form != MessageForm::Moment, config_.svd_rcond);
  if (store_.edge_count() != static_cast<Index>(graph_.edges.size())) {
    throw Error(Errc::InvalidInput, "message store does not match the graph");
  }
}

void GbpEngine::factor_phase() {
  const double rcond = config_.svd_rcond;
  const double d = config_.damping;
  const bool blend = d > 0.0 && last_.iteration > 0;

  auto run_phase = [&](auto& to_factor, auto& to_variable, auto update) {
    using Msg = typename std::decay_t<decltype(to_factor)>::value_type;
    std::vector<Msg> next(to_variable.size());
    std::vector<const Msg*> ptrs;
    for (const auto& f : graph_.pairwise) {
      ptrs.clear();
      for (Index p = 0; p < f.arity(); ++p) ptrs.push_back(&to_factor[static_cast<std::size_t>(graph_.edge_id(f.id, p))]);
      for (Index t = 0; t < f.arity(); ++t) {
        const auto e = static_cast<std::size_t>(graph_.edge_id(f.id, t));
        next[e] = update(f, std::span<const Msg* const>(ptrs), t);
      }
    }
    if (blend) {
      for (std::size_t e = 0; e < next.size(); ++e) {
        next[e].precision = (1.0 - d) * next[e].precision + d * to_variable[e].precision;
        if constexpr (std::is_same_v<Msg, MomentMessage>) {
          next[e].mean = (1.0 - d) * next[e].mean + d * to_variable[e].mean;
        } else {
          next[e].eta = (1.0 - d) * next[e].eta + d * to_variable[e].eta;
        }
      }
    }
    to_variable = std::move(next);
  };

  if (store_.canonical) {
    run_phase(store_.canonical_to_factor, store_.canonical_to_variable,
              [&](const PairwiseFactor& f, std::span<const CanonicalMessage* const> in, Index t) {
                return factor_to_variable_canonical(f, in, t, rcond);
              });
  } else {
    run_phase(store_.moment_to_factor, store_.moment_to_variable,
              [&](const PairwiseFactor& f, std::span<const MomentMessage* const> in, Index t) {
                return factor_to_variable(f, in, t, rcond);
              });
  }
}

namespace {

template <typename Msg>
std::vector<Msg> unary_messages(const FactorGraph& g, const VariableNode& v) {
  std::vector<Msg> out;
  out.reserve(v.unary.size());
  for (Index u : v.unary) {
    const auto& f = g.unary[static_cast<std::size_t>(u)];
    if constexpr (std::is_same_v<Msg, MomentMessage>) {
      out.push_back({f.z, f.lambda});
    } else {
      out.push_back({f.lambda * f.z, f.lambda});
    }
  }
  return out;
}

// Pointers to the unary messages followed by the incoming edge messages.
template <typename Msg>
std::vector<const Msg*> gather(const std::vector<Msg>& unary, const std::vector<Msg>& to_variable,
                               const VariableNode& v) {
  std::vector<const Msg*> ptrs;
  ptrs.reserve(unary.size() + v.edges.size());
  for (const auto& m : unary) ptrs.push_back(&m);
  for (Index e : v.edges) ptrs.push_back(&to_variable[static_cast<std::size_t>(e)]);
  return ptrs;
}

}  // namespace

void GbpEngine::variable_messages_moment(const VariableNode& v, std::vector<MomentMessage>& out) {
  const auto unary = unary_messages<MomentMessage>(graph_, v);
  const auto all = gather(unary, store_.moment_to_variable, v);
  std::vector<const MomentMessage*> ptrs;
  const std::size_t nu = unary.size();
  for (std::size_t k = 0; k < v.edges.size(); ++k) {
    ptrs.assign(all.begin(), all.end());
    ptrs.erase(ptrs.begin() + static_cast<std::ptrdiff_t>(nu + k));
    out[static_cast<std::size_t>(v.edges[k])] = variable_to_factor(ptrs, v.dim, config_.svd_rcond);
  }
}

void GbpEngine::variable_messages_canonical(const VariableNode& v, std::vector<CanonicalMessage>& out) {
  const auto unary = unary_messages<CanonicalMessage>(graph_, v);
  if (config_.form == MessageForm::Broadcast) {
    std::vector<const CanonicalMessage*> uptrs;
    std::vector<const CanonicalMessage*> eptrs;
    for (const auto& m : unary) uptrs.push_back(&m);
    for (Index e : v.edges) eptrs.push_back(&store_.canonical_to_variable[static_cast<std::size_t>(e)]);
    // The belief is not needed here; form the messages from the aggregate directly.
    CanonicalMessage aggregate = variable_to_factor_canonical(uptrs, v.dim);
    for (const auto* m : eptrs) {
      aggregate.precision += m->precision;
      aggregate.eta += m->eta;
    }
    for (std::size_t k = 0; k < v.edges.size(); ++k) {
      out[static_cast<std::size_t>(v.edges[k])] = {aggregate.eta - eptrs[k]->eta,
                                                   symmetrized(aggregate.precision - eptrs[k]->precision)};
    }
    return;
  }
  const auto all = gather(unary, store_.canonical_to_variable, v);
  std::vector<const CanonicalMessage*> ptrs;
  const std::size_t nu = unary.size();
  for (std::size_t k = 0; k < v.edges.size(); ++k) {
    ptrs.assign(all.begin(), all.end());
    ptrs.erase(ptrs.begin() + static_cast<std::ptrdiff_t>(nu + k));
    out[static_cast<std::size_t>(v.edges[k])] = variable_to_factor_canonical(ptrs, v.dim);
  }
}

void GbpEngine::belief_and_variable_phase(std::vector<Belief>& beliefs) {
  const double rcond = config_.svd_rcond;
  beliefs.clear();
  beliefs.reserve(graph_.variables.size());
  for (const auto& v : graph_.variables) {
    switch (config_.form) {
      case MessageForm::Moment: {
        const auto unary = unary_messages<MomentMessage>(graph_, v);
        beliefs.push_back(compute_belief(v.id, gather(unary, store_.moment_to_variable, v), v.dim, rcond));
        variable_messages_moment(v, store_.moment_to_factor);
        break;
      }
      case MessageForm::Canonical: {
        const auto unary = unary_messages<CanonicalMessage>(graph_, v);
        beliefs.push_back(
            compute_belief_canonical(v.id, gather(unary, store_.canonical_to_variable, v), v.dim, rcond));
        variable_messages_canonical(v, store_.canonical_to_factor);
        break;
      }
      case MessageForm::Broadcast: {
        const auto unary = unary_messages<CanonicalMessage>(graph_, v);
        std::vector<const CanonicalMessage*> uptrs;
        std::vector<const CanonicalMessage*> eptrs;
        for (const auto& m : unary) uptrs.push_back(&m);
        for (Index e : v.edges) eptrs.push_back(&store_.canonical_to_variable[static_cast<std::size_t>(e)]);
        std::vector<CanonicalMessage*> optrs;
        for (Index e : v.edges) optrs.push_back(&store_.canonical_to_factor[static_cast<std::size_t>(e)]);
        beliefs.push_back(broadcast_variable_update(v.id, uptrs, eptrs, optrs, v.dim, rcond));
        break;
      }
    }
  }
}

const IterationRecord& GbpEngine::step() {
  factor_phase();
  IterationRecord record;
  record.iteration = last_.iteration + 1;
  belief_and_variable_phase(record.beliefs);
  if (last_.beliefs.size() == record.beliefs.size()) {
    double delta = 0.0;
    for (std::size_t k = 0; k < record.beliefs.size(); ++k) {
      delta = std::max(delta, (record.beliefs[k].mean - last_.beliefs[k].mean).cwiseAbs().maxCoeff());
    }
    record.max_delta = delta;
  }
  last_ = std::move(record);
  if (config_.record_trace) trace_.push_back(last_);
  return last_;
}

RunResult GbpEngine::run() {
  while (last_.iteration < config_.max_iterations) {
    step();
    if (converged()) break;
  }
  RunResult out;
  out.beliefs = last_.beliefs;
  out.trace = trace_;
  out.converged = converged();
  out.iterations = last_.iteration;
  return out;
}

void GbpEngine::refresh_outgoing(Index variable) {
  const auto& v = graph_.variables.at(static_cast<std::size_t>(variable));
  if (store_.canonical) {
    variable_messages_canonical(v, store_.canonical_to_factor);
  } else {
    variable_messages_moment(v, store_.moment_to_factor);
  }
}

RunResult run(const FactorGraph& graph, const SolverConfig& config, const MessageStore& initial) {
  GbpEngine engine(graph, config, initial);
  return engine.run();
}

std::vector<Vec2> bus_estimates(const FactorGraph& graph, const std::vector<Belief>& beliefs) {
  if (beliefs.size() != graph.variables.size()) throw Error(Errc::InvalidInput, "belief count does not match graph");
  std::vector<Vec2> out(static_cast<std::size_t>(graph.bus_count), Vec2::Zero());
  for (const auto& v : graph.variables) {
    const Vec& mean = beliefs[static_cast<std::size_t>(v.id)].mean;
    auto& x = out[static_cast<std::size_t>(v.bus)];
    if (v.component >= 0) {
      x(v.component) = mean(0);
    } else {
      x = mean;
    }
  }
  return out;
}

}  // namespace pmugbp
