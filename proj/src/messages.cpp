#include <Eigen/Cholesky>

#include "pmugbp/gbp_engine.hpp"

namespace pmugbp {

namespace {

Index target_dim(const PairwiseFactor& f, Index target) {
  if (target < 0 || target >= f.arity()) throw Error(Errc::InvalidInput, "factor position out of range");
  return f.blocks[static_cast<std::size_t>(target)].cols();
}

template <typename Msg>
void check_incoming(const PairwiseFactor& f, std::span<const Msg* const> incoming) {
  if (static_cast<Index>(incoming.size()) != f.arity()) {
    throw Error(Errc::InvalidInput, "incoming message count does not match factor arity");
  }
}

// Inverse of the innovation covariance seen by position `target`, together
// with the residual z - sum_u H_u m_u. Returns false when some non-target
// neighbour is uninformative.
template <typename Msg, typename MeanOf>
bool innovation(const PairwiseFactor& f, std::span<const Msg* const> incoming, Index target, double rcond,
                MeanOf mean_of, Mat& v_inv, Vec& residual) {
  Mat v = f.sigma;
  residual = f.z;
  for (Index u = 0; u < f.arity(); ++u) {
    if (u == target) continue;
    const Msg& in = *incoming[static_cast<std::size_t>(u)];
    if (in.precision.isZero(0)) return false;
    const Mat& h = f.blocks[static_cast<std::size_t>(u)];
    const Mat cov = robust_inverse(in.precision, rcond);
    v.noalias() += h * cov * h.transpose();
    residual.noalias() -= h * mean_of(in, cov);
  }
  auto inv = try_robust_inverse(v, rcond);
  if (!inv) throw Error(Errc::SingularInnovation, "innovation covariance is numerically zero");
  v_inv = std::move(*inv);
  return true;
}

bool positive_definite(const Mat& m) {
  if (m.rows() == 0) return false;
  Eigen::LLT<Mat> llt(m);
  return llt.info() == Eigen::Success;
}

Vec solve_mean(const Mat& precision, const Vec& info, double rcond) {
  auto inv = try_robust_inverse(precision, rcond);
  if (!inv) return Vec::Zero(info.size());
  return *inv * info;
}

}  // namespace

MomentMessage zero_moment(Index dim) { return {Vec::Zero(dim), Mat::Zero(dim, dim)}; }

CanonicalMessage zero_canonical(Index dim) { return {Vec::Zero(dim), Mat::Zero(dim, dim)}; }

CanonicalMessage to_canonical(const MomentMessage& m) { return {m.precision * m.mean, m.precision}; }

MomentMessage to_moment(const CanonicalMessage& c, double rcond) {
  return {solve_mean(c.precision, c.eta, rcond), c.precision};
}

MomentMessage factor_to_variable(const PairwiseFactor& factor, std::span<const MomentMessage* const> incoming,
                                 Index target, double rcond) {
  const Index dim = target_dim(factor, target);
  check_incoming(factor, incoming);
  Mat v_inv;
  Vec residual;
  const auto mean_of = [](const MomentMessage& m, const Mat&) -> const Vec& { return m.mean; };
  if (!innovation(factor, incoming, target, rcond, mean_of, v_inv, residual)) return zero_moment(dim);
  const Mat& h = factor.blocks[static_cast<std::size_t>(target)];
  const Mat ht_w = h.transpose() * v_inv;
  MomentMessage out;
  out.precision = symmetrized(ht_w * h);
  out.mean = solve_mean(out.precision, ht_w * residual, rcond);
  return out;
}

MomentMessage factor_to_variable(const PairwiseFactor& factor, const MomentMessage& incoming, Index target,
                                 double rcond) {
  if (factor.arity() != 2) throw Error(Errc::InvalidInput, "factor is not pairwise");
  const MomentMessage* ptrs[2] = {&incoming, &incoming};
  return factor_to_variable(factor, std::span<const MomentMessage* const>(ptrs, 2), target, rcond);
}

CanonicalMessage factor_to_variable_canonical(const PairwiseFactor& factor,
                                              std::span<const CanonicalMessage* const> incoming, Index target,
                                              double rcond) {
  const Index dim = target_dim(factor, target);
  check_incoming(factor, incoming);
  Mat v_inv;
  Vec residual;
  const auto mean_of = [](const CanonicalMessage& m, const Mat& cov) -> Vec { return cov * m.eta; };
  if (!innovation(factor, incoming, target, rcond, mean_of, v_inv, residual)) return zero_canonical(dim);
  const Mat& h = factor.blocks[static_cast<std::size_t>(target)];
  const Mat ht_w = h.transpose() * v_inv;
  return {ht_w * residual, symmetrized(ht_w * h)};
}

CanonicalMessage factor_to_variable_canonical(const PairwiseFactor& factor, const CanonicalMessage& incoming,
                                              Index target, double rcond) {
  if (factor.arity() != 2) throw Error(Errc::InvalidInput, "factor is not pairwise");
  const CanonicalMessage* ptrs[2] = {&incoming, &incoming};
  return factor_to_variable_canonical(factor, std::span<const CanonicalMessage* const>(ptrs, 2), target, rcond);
}

MomentMessage variable_to_factor(std::span<const MomentMessage* const> incoming, Index dim, double rcond) {
  Mat precision = Mat::Zero(dim, dim);
  Vec info = Vec::Zero(dim);
  for (const MomentMessage* m : incoming) {
    precision += m->precision;
    info.noalias() += m->precision * m->mean;
  }
  precision = symmetrized(precision);
  return {solve_mean(precision, info, rcond), precision};
}

CanonicalMessage variable_to_factor_canonical(std::span<const CanonicalMessage* const> incoming, Index dim) {
  CanonicalMessage out = zero_canonical(dim);
  for (const CanonicalMessage* m : incoming) {
    out.precision += m->precision;
    out.eta += m->eta;
  }
  out.precision = symmetrized(out.precision);
  return out;
}

Belief compute_belief(Index variable, std::span<const MomentMessage* const> incoming, Index dim, double rcond) {
  const MomentMessage product = variable_to_factor(incoming, dim, rcond);
  if (!positive_definite(product.precision)) {
    throw Error(Errc::SingularBelief, "belief precision of variable " + std::to_string(variable) +
                                          " is not positive definite");
  }
  return {variable, product.mean, product.precision};
}

Belief compute_belief_canonical(Index variable, std::span<const CanonicalMessage* const> incoming, Index dim,
                                double rcond) {
  const CanonicalMessage sum = variable_to_factor_canonical(incoming, dim);
  if (!positive_definite(sum.precision)) {
    throw Error(Errc::SingularBelief, "belief precision of variable " + std::to_string(variable) +
                                          " is not positive definite");
  }
  return {variable, solve_mean(sum.precision, sum.eta, rcond), sum.precision};
}

Belief broadcast_variable_update(Index variable, std::span<const CanonicalMessage* const> unary,
                                 std::span<const CanonicalMessage* const> edge_incoming,
                                 std::span<CanonicalMessage* const> outgoing, Index dim, double rcond) {
  if (outgoing.size() != edge_incoming.size()) {
    throw Error(Errc::InvalidInput, "broadcast_variable_update: one outgoing slot per edge is required");
  }
  CanonicalMessage aggregate = zero_canonical(dim);
  for (const CanonicalMessage* m : unary) {
    aggregate.precision += m->precision;
    aggregate.eta += m->eta;
  }
  for (const CanonicalMessage* m : edge_incoming) {
    aggregate.precision += m->precision;
    aggregate.eta += m->eta;
  }
  aggregate.precision = symmetrized(aggregate.precision);

  for (std::size_t k = 0; k < edge_incoming.size(); ++k) {
    outgoing[k]->eta = aggregate.eta - edge_incoming[k]->eta;
    outgoing[k]->precision = aggregate.precision - edge_incoming[k]->precision;
    outgoing[k]->precision = symmetrized(outgoing[k]->precision);
  }
  if (!positive_definite(aggregate.precision)) {
    throw Error(Errc::SingularBelief, "belief precision of variable " + std::to_string(variable) +
                                          " is not positive definite");
  }
  return {variable, solve_mean(aggregate.precision, aggregate.eta, rcond), aggregate.precision};
}

BroadcastUpdate broadcast_variable_update(Index variable, std::span<const CanonicalMessage* const> unary,
                                          std::span<const CanonicalMessage* const> edge_incoming, Index dim,
                                          double rcond) {
  BroadcastUpdate out;
  out.outgoing.resize(edge_incoming.size());
  std::vector<CanonicalMessage*> slots;
  for (auto& m : out.outgoing) slots.push_back(&m);
  out.belief = broadcast_variable_update(variable, unary, edge_incoming, slots, dim, rcond);
  return out;
}

}  // namespace pmugbp
