#pragma once

#include <Eigen/SparseCore>

#include <vector>

#include "pmugbp/factor_graph.hpp"

namespace pmugbp {

using SparseMat = Eigen::SparseMatrix<double>;

/// Stacked linear model z = H x + e, e ~ N(0, sigma). Bus b owns columns
/// 2b (real) and 2b + 1 (imaginary).
struct LinearSystem {
  SparseMat h;
  SparseMat sigma;
  SparseMat weight;  // block-wise inverse of sigma
  Vec z;
  Index bus_count = 0;

  Index rows() const { return z.size(); }
};

LinearSystem assemble(const BusBranchModel& model, const std::vector<RectangularPhasor>& measurements,
                      CovarianceModel covariance = CovarianceModel::Full);

/// Assembles the system carried by the factors of a graph.
LinearSystem assemble(const FactorGraph& graph);

struct NormalEquations {
  SparseMat gain;  // H^T W H
  Vec rhs;         // H^T W z
};

NormalEquations normal_equations(const LinearSystem& system);

/// Weighted least-squares estimate via a sparse LDL^T factorization of the
/// normal equations. Throws RankDeficient when the gain matrix is singular.
Vec solve(const LinearSystem& system);

struct Observability {
  bool observable = false;
  Index rank = 0;
};

Observability observability(const LinearSystem& system, double threshold = 1e-10);

/// Splits a stacked [re0, im0, re1, ...] vector into per-bus phasors.
std::vector<Vec2> unstack(const Vec& x);
Vec stack(const std::vector<Vec2>& x);

// --- metrics -------------------------------------------------------------------

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct PolarError {
  double magnitude = 0.0;
  double angle = 0.0;
};

PolarError rmse(const std::vector<Vec2>& estimate, const std::vector<Vec2>& truth);

/// |estimate - reference| per bus in magnitude and wrapped angle.
std::vector<PolarError> absolute_errors(const std::vector<Vec2>& estimate, const std::vector<Vec2>& reference);

struct EstimateReport {
  std::vector<Vec2> wls;
  PolarError wls_rmse;
  std::vector<PolarError> rmse_ratio;            // per iteration
  std::vector<std::vector<PolarError>> ae;       // per iteration, per bus
};

EstimateReport metrics(const std::vector<std::vector<Vec2>>& gbp_trace, const std::vector<Vec2>& wls,
                       const std::vector<Vec2>& truth);

/// First trace position from which both RMSE ratios stay at or below
/// `target` until the end of the trace, or -1.
Index first_settled(const std::vector<PolarError>& rmse_ratio, double target);

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

struct BoxStats {
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double whisker_lo = 0.0;  // smallest value within 1.5 IQR of q25
  double whisker_hi = 0.0;  // largest value within 1.5 IQR of q75
};

BoxStats box_stats(const std::vector<double>& values);

}  // namespace pmugbp
