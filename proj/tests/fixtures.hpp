#pragma once

#include <cstdint>
#include <vector>

#include "pmugbp/convergence.hpp"
#include "pmugbp/gbp_engine.hpp"
#include "pmugbp/stream.hpp"
#include "pmugbp/wls.hpp"

namespace fixtures {

using namespace pmugbp;

/// Three buses labelled 1..3, every pair linked by r = 0.1, x = 0.2.
inline BusBranchModel triangle() {
  std::vector<Bus> buses{{0, 1, 230.0}, {1, 2, 230.0}, {2, 3, 230.0}};
  std::vector<Branch> branches{Branch::from_impedance(0, 1, 0.1, 0.2), Branch::from_impedance(0, 2, 0.1, 0.2),
                               Branch::from_impedance(1, 2, 0.1, 0.2)};
  return BusBranchModel(buses, branches);
}

/// PMUs at buses 1 and 2 of the triangle, in factor order f1..f6.
inline std::vector<PolarPhasor> triangle_phasors() {
  auto p = [](PhasorKind kind, double m, double t) { return PolarPhasor{kind, m, t, 1e-6, 1e-4}; };
  return {p(BusVoltage{0}, 1.11, -0.10),
          p(BusVoltage{1}, 0.94, -0.11),
          p(BranchCurrent{0, Direction::FromTo}, 0.71, -1.22),
          p(BranchCurrent{1, Direction::FromTo}, 0.67, -2.01),
          p(BranchCurrent{0, Direction::ToFrom}, 0.71, 1.92),
          p(BranchCurrent{2, Direction::FromTo}, 0.53, 3.03)};
}

inline std::vector<RectangularPhasor> triangle_measurements() { return to_rectangular(triangle_phasors()); }

inline FactorGraph triangle_graph(GraphMode mode, CovarianceModel cov = CovarianceModel::Diagonal) {
  return build_graph(triangle(), triangle_measurements(), mode, {cov});
}

/// Edge carrying messages between pairwise factor `factor` and variable `variable`.
inline Index edge_between(const FactorGraph& g, Index factor, Index variable) {
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e].factor == factor && g.edges[e].variable == variable) return static_cast<Index>(e);
  }
  return -1;
}

/// Pairwise factor joining two variables, or -1.
inline Index factor_between(const FactorGraph& g, Index a, Index b) {
  for (const auto& f : g.pairwise) {
    if (f.arity() == 2 && ((f.variables[0] == a && f.variables[1] == b) || (f.variables[0] == b && f.variables[1] == a))) {
      return f.id;
    }
  }
  return -1;
}

struct Case {
  BusBranchModel model;
  GroundTruthState truth;
  PmuConfig pmu;
  std::vector<PolarPhasor> polar;
  std::vector<RectangularPhasor> measurements;
};

inline Case synthetic_case(Index buses, double redundancy, std::uint64_t seed, const MeasurementVariances& vars = {},
                           double degree = 3.0) {
  Case c;
  GridOptions grid;
  grid.buses = buses;
  grid.average_degree = degree;
  c.model = synth_grid(grid, seed);
  c.truth = synth_state(c.model, seed);
  c.pmu = add_random_pmus(c.model, place_pmus_greedy(c.model), redundancy, seed);
  c.polar = generate_measurements(c.model, c.truth, c.pmu, vars, seed);
  c.measurements = to_rectangular(c.polar);
  return c;
}

inline double max_abs_diff(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return d;
}

/// Per-edge difference in information coordinates (precision * mean and
/// precision), each normwise relative to max(1, |reference|).
inline double message_gap(const MomentMessage& a, const MomentMessage& b) {
  const Vec ea = a.precision * a.mean;
  const Vec eb = b.precision * b.mean;
  const double de = (ea - eb).cwiseAbs().maxCoeff() / std::max(1.0, ea.cwiseAbs().maxCoeff());
  const double dp =
      (a.precision - b.precision).cwiseAbs().maxCoeff() / std::max(1.0, a.precision.cwiseAbs().maxCoeff());
  return std::max(de, dp);
}

inline double store_gap(const MessageStore& a, const MessageStore& b) {
  double gap = 0.0;
  for (Index e = 0; e < a.edge_count(); ++e) {
    gap = std::max(gap, message_gap(a.to_variable(e), b.to_variable(e)));
    gap = std::max(gap, message_gap(a.to_factor(e), b.to_factor(e)));
  }
  return gap;
}

}  // namespace fixtures
