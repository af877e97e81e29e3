#include "pmugbp/wls.hpp"

#include <Eigen/QR>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pmugbp {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void put_block(Triplets& t, Index row, Index col, const Mat& block) {
  for (Index r = 0; r < block.rows(); ++r) {
    for (Index c = 0; c < block.cols(); ++c) {
      if (block(r, c) != 0.0) t.emplace_back(row + r, col + c, block(r, c));
    }
  }
}

struct Builder {
  Triplets h, sigma, weight;
  std::vector<double> z;

  void add(const std::vector<std::pair<Index, Mat>>& cols, const Vec& value, const Mat& cov) {
    const auto row = static_cast<Index>(z.size());
    for (const auto& [col, block] : cols) put_block(h, row, col, block);
    put_block(sigma, row, row, cov);
    put_block(weight, row, row, robust_inverse(cov));
    for (Index k = 0; k < value.size(); ++k) z.push_back(value(k));
  }

  LinearSystem finish(Index buses) const {
    LinearSystem s;
    const auto rows = static_cast<Index>(z.size());
    s.bus_count = buses;
    s.h.resize(rows, 2 * buses);
    s.h.setFromTriplets(h.begin(), h.end());
    s.sigma.resize(rows, rows);
    s.sigma.setFromTriplets(sigma.begin(), sigma.end());
    s.weight.resize(rows, rows);
    s.weight.setFromTriplets(weight.begin(), weight.end());
    s.z = Eigen::Map<const Vec>(z.data(), rows);
    return s;
  }
};

}  // namespace

LinearSystem assemble(const BusBranchModel& model, const std::vector<RectangularPhasor>& measurements,
                      CovarianceModel covariance) {
  Builder b;
  for (const auto& m : measurements) {
    const auto buses = phasor_buses(model, m.kind);
    Mat2 sigma = m.sigma;
    if (covariance == CovarianceModel::Diagonal) sigma = Mat2(m.sigma.diagonal().asDiagonal());
    if (is_voltage(m.kind)) {
      b.add({{2 * buses[0], Mat2::Identity()}}, m.z, sigma);
    } else {
      const auto& c = std::get<BranchCurrent>(m.kind);
      const auto [h_from, h_to] = current_coefficients(model.branch(c.branch), c.direction);
      b.add({{2 * buses[0], h_from}, {2 * buses[1], h_to}}, m.z, sigma);
    }
  }
  return b.finish(model.bus_count());
}

LinearSystem assemble(const FactorGraph& graph) {
  Builder b;
  auto column = [&](Index var) {
    const auto& v = graph.variables[static_cast<std::size_t>(var)];
    return v.component >= 0 ? 2 * v.bus + v.component : 2 * v.bus;
  };
  for (const auto& u : graph.unary) {
    const Index dim = u.z.size();
    b.add({{column(u.variable), Mat::Identity(dim, dim)}}, u.z, robust_inverse(u.lambda));
  }
  for (const auto& f : graph.pairwise) {
    std::vector<std::pair<Index, Mat>> cols;
    for (Index p = 0; p < f.arity(); ++p) {
      cols.emplace_back(column(f.variables[static_cast<std::size_t>(p)]), f.blocks[static_cast<std::size_t>(p)]);
    }
    b.add(cols, f.z, f.sigma);
  }
  return b.finish(graph.bus_count);
}

NormalEquations normal_equations(const LinearSystem& s) {
  const SparseMat ht_w = s.h.transpose() * s.weight;
  NormalEquations ne;
  ne.gain = ht_w * s.h;
  ne.rhs = ht_w * s.z;
  return ne;
}

Vec solve(const LinearSystem& system) {
  const auto ne = normal_equations(system);
  if (ne.gain.rows() == 0) return Vec();
  Eigen::SimplicialLDLT<SparseMat> ldlt(ne.gain);
  if (ldlt.info() != Eigen::Success) throw Error(Errc::RankDeficient, "gain matrix factorization failed");
  const Vec d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > 1e-14 * dmax)) throw Error(Errc::RankDeficient, "gain matrix is singular");
  Vec x = ldlt.solve(ne.rhs);
  if (ldlt.info() != Eigen::Success || !x.allFinite()) throw Error(Errc::RankDeficient, "gain matrix solve failed");
  return x;
}

Observability observability(const LinearSystem& system, double threshold) {
  Observability out;
  if (system.rows() == 0) return out;
  Eigen::ColPivHouseholderQR<Mat> qr(Mat(system.h));
  qr.setThreshold(threshold);
  out.rank = qr.rank();
  out.observable = out.rank == system.h.cols();
  return out;
}

std::vector<Vec2> unstack(const Vec& x) {
  std::vector<Vec2> out(static_cast<std::size_t>(x.size() / 2));
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = x.segment<2>(2 * static_cast<Index>(b));
  return out;
}

Vec stack(const std::vector<Vec2>& x) {
  Vec out(2 * static_cast<Index>(x.size()));
  for (std::size_t b = 0; b < x.size(); ++b) out.segment<2>(2 * static_cast<Index>(b)) = x[b];
  return out;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

std::vector<PolarError> absolute_errors(const std::vector<Vec2>& estimate, const std::vector<Vec2>& reference) {
  if (estimate.size() != reference.size()) throw Error(Errc::InvalidInput, "estimate and reference sizes differ");
  std::vector<PolarError> out(estimate.size());
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const Vec2& a = estimate[i];
    const Vec2& b = reference[i];
    out[i].magnitude = std::abs(a.norm() - b.norm());
    out[i].angle = std::abs(wrap_angle(std::atan2(a(1), a(0)) - std::atan2(b(1), b(0))));
  }
  return out;
}

PolarError rmse(const std::vector<Vec2>& estimate, const std::vector<Vec2>& truth) {
  const auto ae = absolute_errors(estimate, truth);
  PolarError out;
  if (ae.empty()) return out;
  for (const auto& e : ae) {
    out.magnitude += e.magnitude * e.magnitude;
    out.angle += e.angle * e.angle;
  }
  const auto n = static_cast<double>(ae.size());
  out.magnitude = std::sqrt(out.magnitude / n);
  out.angle = std::sqrt(out.angle / n);
  return out;
}

EstimateReport metrics(const std::vector<std::vector<Vec2>>& gbp_trace, const std::vector<Vec2>& wls,
                       const std::vector<Vec2>& truth) {
  EstimateReport r;
  r.wls = wls;
  r.wls_rmse = rmse(wls, truth);
  for (const auto& estimate : gbp_trace) {
    const PolarError e = rmse(estimate, truth);
    r.rmse_ratio.push_back({e.magnitude / r.wls_rmse.magnitude, e.angle / r.wls_rmse.angle});
    r.ae.push_back(absolute_errors(estimate, wls));
  }
  return r;
}

Index first_settled(const std::vector<PolarError>& rmse_ratio, double target) {
  Index first = -1;
  for (Index k = static_cast<Index>(rmse_ratio.size()) - 1; k >= 0; --k) {
    const auto& r = rmse_ratio[static_cast<std::size_t>(k)];
    if (!(r.magnitude <= target && r.angle <= target)) break;
    first = k;
  }
  return first;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(Errc::InvalidInput, "quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::InvalidInput, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BoxStats box_stats(const std::vector<double>& values) {
  BoxStats s;
  s.q25 = quantile(values, 0.25);
  s.q50 = quantile(values, 0.5);
  s.q75 = quantile(values, 0.75);
  const double iqr = s.q75 - s.q25;
  const double lo_fence = s.q25 - 1.5 * iqr;
  const double hi_fence = s.q75 + 1.5 * iqr;
  s.whisker_lo = s.q25;
  s.whisker_hi = s.q75;
  for (double v : values) {
    if (v >= lo_fence) s.whisker_lo = std::min(s.whisker_lo, v);
    if (v <= hi_fence) s.whisker_hi = std::max(s.whisker_hi, v);
  }
  return s;
}

}  // namespace pmugbp
