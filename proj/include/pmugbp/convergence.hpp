#pragma once

#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <vector>

#include "pmugbp/gbp_engine.hpp"

namespace pmugbp {

/// Message precisions at the fixed point of the precision recursion, one
/// entry per edge in both directions.
struct PrecisionFixedPoint {
  std::vector<Mat> to_variable;  // factor -> variable
  std::vector<Mat> to_factor;    // variable -> factor
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residuals;  // per iteration, the first is infinite
  bool converged = false;
};

/// Iterates the precision-only part of the synchronous schedule, starting
/// from the variable->factor precisions of `init`, until the largest
/// relative Frobenius change of a factor->variable precision drops below
/// `tol`. Scalar graphs are rejected.
PrecisionFixedPoint iterate_precision_fixed_point(const FactorGraph& graph, const MessageStore& init,
                                                  double tol = 1e-13, int max_iterations = 1000,
                                                  double rcond = kDefaultRcond);

struct MessageSlot {
  Index edge = 0;
  Index variable = 0;
  Index factor = 0;
};

/// Affine recursion z <- b - Q z over the stacked variable->factor means.
/// Slot k covers rows 2k, 2k + 1 and belongs to edge k.
struct ConvergenceSystem {
  Eigen::SparseMatrix<double> q;
  Vec b;
  std::vector<MessageSlot> slots;
  std::vector<Mat> v_star;      // innovation covariance of the message towards each edge's variable
  std::vector<Mat> v_star_inv;
};

ConvergenceSystem assemble_mean_recursion(const FactorGraph& graph, const PrecisionFixedPoint& fixed_point,
                                          double rcond = kDefaultRcond);

enum class SpectralMethod { Dense, Power, Auto };

const char* to_string(SpectralMethod method);

struct SpectralReport {
  double rho = 0.0;
  double one_minus_rho = 1.0;
  SpectralMethod method = SpectralMethod::Dense;
  int iterations = 0;
  bool converged = true;
};

struct PowerOptions {
  std::uint64_t seed = 12345;
  int max_matvecs = 10000;
  int krylov_dim = 12;
  double tol = 1e-10;
  Index dense_limit = 2000;  // Auto uses the dense solver up to this many rows
};

/// Spectral radius of Q. Power mode runs power iteration with a small
/// Krylov (Arnoldi) acceleration per restart, which resolves dominant
/// complex or +/- pairs; it throws PowerIterationStalled when the estimate
/// does not settle. Auto picks Dense for small systems and falls back to
/// Dense when the power method stalls.
SpectralReport spectral_radius(const Eigen::SparseMatrix<double>& q, SpectralMethod method,
                               const PowerOptions& options = {});

inline SpectralReport spectral_radius(const ConvergenceSystem& system, SpectralMethod method,
                                      const PowerOptions& options = {}) {
  return spectral_radius(system.q, method, options);
}

struct FixedPointMeans {
  Vec z;
  double residual = 0.0;  // ||(I + Q) z - b|| / max(1, ||b||)
};

FixedPointMeans fixed_point_means(const ConvergenceSystem& system);

/// Bus estimates implied by stacked variable->factor means.
std::vector<Vec2> beliefs_from_slot_means(const FactorGraph& graph, const PrecisionFixedPoint& fixed_point,
                                          const ConvergenceSystem& system, const Vec& z,
                                          double rcond = kDefaultRcond);

/// Moment store carrying the fixed-point precisions, with variable->factor
/// means taken from the stacked vector `z`.
MessageStore frozen_store(const FactorGraph& graph, const PrecisionFixedPoint& fixed_point, const Vec& z);

/// Stacked variable->factor means of a message store.
Vec slot_means(const MessageStore& store, double rcond = kDefaultRcond);

}  // namespace pmugbp
