#include "pmugbp/convergence.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>

namespace pmugbp {

namespace {

void require_vector_graph(const FactorGraph& graph) {
  if (graph.mode == GraphMode::Scalar) {
    throw Error(Errc::InvalidInput, "convergence analysis needs a multivariate or fusion graph");
  }
}

Index other_position(const PairwiseFactor& f, Index t) {
  if (f.arity() != 2) throw Error(Errc::InvalidInput, "convergence analysis needs pairwise factors");
  return 1 - t;
}

std::vector<Mat> unary_precision(const FactorGraph& graph) {
  std::vector<Mat> out;
  for (const auto& v : graph.variables) {
    Mat sum = Mat::Zero(v.dim, v.dim);
    for (Index u : v.unary) sum += graph.unary[static_cast<std::size_t>(u)].lambda;
    out.push_back(sum);
  }
  return out;
}

std::vector<Vec> unary_information(const FactorGraph& graph) {
  std::vector<Vec> out;
  for (const auto& v : graph.variables) {
    Vec sum = Vec::Zero(v.dim);
    for (Index u : v.unary) {
      const auto& f = graph.unary[static_cast<std::size_t>(u)];
      sum += f.lambda * f.z;
    }
    out.push_back(sum);
  }
  return out;
}

// Innovation covariance and its inverse for the message from factor `f`
// towards position `t`, given the precision arriving from the other end.
// Returns false when that precision is exactly zero.
bool innovation_of(const PairwiseFactor& f, Index t, const Mat& other_precision, double rcond, Mat& v, Mat& v_inv) {
  const Index u = other_position(f, t);
  v = f.sigma;
  if (other_precision.isZero(0)) return false;
  const Mat& h = f.blocks[static_cast<std::size_t>(u)];
  v.noalias() += h * robust_inverse(other_precision, rcond) * h.transpose();
  auto inv = try_robust_inverse(v, rcond);
  if (!inv) throw Error(Errc::SingularInnovation, "innovation covariance is numerically zero");
  v_inv = std::move(*inv);
  return true;
}

}  // namespace

PrecisionFixedPoint iterate_precision_fixed_point(const FactorGraph& graph, const MessageStore& init, double tol,
                                                  int max_iterations, double rcond) {
  require_vector_graph(graph);
  const std::size_t edges = graph.edges.size();
  if (static_cast<std::size_t>(init.edge_count()) != edges) {
    throw Error(Errc::InvalidInput, "message store does not match the graph");
  }
  const auto unary = unary_precision(graph);

  PrecisionFixedPoint fp;
  fp.to_factor.reserve(edges);
  for (std::size_t e = 0; e < edges; ++e) fp.to_factor.push_back(init.to_factor(static_cast<Index>(e), rcond).precision);
  fp.to_variable.assign(edges, Mat());
  fp.residual = std::numeric_limits<double>::infinity();

  Mat v, v_inv;
  for (int it = 1; it <= max_iterations; ++it) {
    std::vector<Mat> next(edges);
    for (const auto& f : graph.pairwise) {
      for (Index t = 0; t < f.arity(); ++t) {
        const auto e = static_cast<std::size_t>(graph.edge_id(f.id, t));
        const auto eu = static_cast<std::size_t>(graph.edge_id(f.id, other_position(f, t)));
        const Mat& h = f.blocks[static_cast<std::size_t>(t)];
        if (!innovation_of(f, t, fp.to_factor[eu], rcond, v, v_inv)) {
          next[e] = Mat::Zero(h.cols(), h.cols());
          continue;
        }
        next[e] = symmetrized(h.transpose() * v_inv * h);
      }
    }
    double residual = it == 1 ? std::numeric_limits<double>::infinity() : 0.0;
    if (it > 1) {
      for (std::size_t e = 0; e < edges; ++e) {
        const double scale = std::max(1.0, next[e].norm());
        residual = std::max(residual, (next[e] - fp.to_variable[e]).norm() / scale);
      }
    }
    fp.to_variable = std::move(next);
    for (const auto& var : graph.variables) {
      for (Index e : var.edges) {
        Mat sum = unary[static_cast<std::size_t>(var.id)];
        for (Index a : var.edges) {
          if (a != e) sum += fp.to_variable[static_cast<std::size_t>(a)];
        }
        fp.to_factor[static_cast<std::size_t>(e)] = symmetrized(sum);
      }
    }
    fp.iterations = it;
    fp.residual = residual;
    fp.residuals.push_back(residual);
    if (residual < tol) {
      fp.converged = true;
      return fp;
    }
  }
  throw Error(Errc::NotConverged, "precision recursion did not reach its fixed point");
}

ConvergenceSystem assemble_mean_recursion(const FactorGraph& graph, const PrecisionFixedPoint& fp, double rcond) {
  require_vector_graph(graph);
  const auto edges = static_cast<Index>(graph.edges.size());
  ConvergenceSystem sys;
  sys.slots.reserve(graph.edges.size());
  for (Index e = 0; e < edges; ++e) {
    const auto& edge = graph.edges[static_cast<std::size_t>(e)];
    sys.slots.push_back({e, edge.variable, edge.factor});
  }

  // Per edge a: gain G_a = H_t^T V_a^-1 and the coupling G_a H_u towards
  // the slot of the other end.
  std::vector<Mat> gain(graph.edges.size());
  std::vector<Mat> coupling(graph.edges.size());
  std::vector<Index> source_slot(graph.edges.size());
  sys.v_star.resize(graph.edges.size());
  sys.v_star_inv.resize(graph.edges.size());
  for (const auto& f : graph.pairwise) {
    for (Index t = 0; t < f.arity(); ++t) {
      const Index u = other_position(f, t);
      const auto e = static_cast<std::size_t>(graph.edge_id(f.id, t));
      const Index eu = graph.edge_id(f.id, u);
      const Mat& h_t = f.blocks[static_cast<std::size_t>(t)];
      const Mat& h_u = f.blocks[static_cast<std::size_t>(u)];
      source_slot[e] = eu;
      Mat v, v_inv;
      if (innovation_of(f, t, fp.to_factor[static_cast<std::size_t>(eu)], rcond, v, v_inv)) {
        gain[e] = h_t.transpose() * v_inv;
      } else {
        v_inv = Mat::Zero(v.rows(), v.cols());
        gain[e] = Mat::Zero(h_t.cols(), f.rows());
      }
      coupling[e] = gain[e] * h_u;
      sys.v_star[e] = std::move(v);
      sys.v_star_inv[e] = std::move(v_inv);
    }
  }

  const auto info = unary_information(graph);
  const Index dim = 2;
  sys.b = Vec::Zero(dim * edges);
  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& var : graph.variables) {
    for (Index e : var.edges) {
      const Mat l_inv = try_robust_inverse(fp.to_factor[static_cast<std::size_t>(e)], rcond).value_or(Mat::Zero(dim, dim));
      Vec rhs = info[static_cast<std::size_t>(var.id)];
      for (Index a : var.edges) {
        if (a == e) continue;
        const auto as = static_cast<std::size_t>(a);
        const auto& f = graph.pairwise[static_cast<std::size_t>(graph.edges[as].factor)];
        rhs += gain[as] * f.z;
        const Mat k = l_inv * coupling[as];
        const Index col = dim * source_slot[as];
        for (Index r = 0; r < dim; ++r) {
          for (Index c = 0; c < dim; ++c) {
            if (k(r, c) != 0.0) triplets.emplace_back(dim * e + r, col + c, k(r, c));
          }
        }
      }
      sys.b.segment(dim * e, dim) = l_inv * rhs;
    }
  }
  sys.q.resize(dim * edges, dim * edges);
  sys.q.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

const char* to_string(SpectralMethod method) {
  switch (method) {
    case SpectralMethod::Dense: return "dense";
    case SpectralMethod::Power: return "power";
    case SpectralMethod::Auto: return "auto";
  }
  return "?";
}

namespace {

SpectralReport dense_radius(const Eigen::SparseMatrix<double>& q) {
  SpectralReport r;
  r.method = SpectralMethod::Dense;
  if (q.rows() > 0 && q.nonZeros() > 0) {
    Eigen::EigenSolver<Mat> es(Mat(q), false);
    if (es.info() != Eigen::Success) throw Error(Errc::NearSingular, "dense eigenvalue computation failed");
    r.rho = es.eigenvalues().cwiseAbs().maxCoeff();
  }
  r.one_minus_rho = 1.0 - r.rho;
  return r;
}

SpectralReport power_radius(const Eigen::SparseMatrix<double>& q, const PowerOptions& opt) {
  SpectralReport r;
  r.method = SpectralMethod::Power;
  const Index n = q.rows();
  double scale = 0.0;
  for (int k = 0; k < q.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(q, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  }
  if (n == 0 || scale == 0.0) return r;

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  v.normalize();

  const Index m = std::min<Index>(opt.krylov_dim, n);
  Mat basis(n, m + 1);
  Mat hess(m + 1, m);
  double previous = -1.0;
  while (r.iterations < opt.max_matvecs) {
    basis.setZero();
    hess.setZero();
    basis.col(0) = v;
    Index k = m;
    bool breakdown = false;
    for (Index j = 0; j < m; ++j) {
      Vec w = q * basis.col(j);
      ++r.iterations;
      for (int pass = 0; pass < 2; ++pass) {
        for (Index i = 0; i <= j; ++i) {
          const double h = basis.col(i).dot(w);
          hess(i, j) += h;
          w -= h * basis.col(i);
        }
      }
      hess(j + 1, j) = w.norm();
      if (hess(j + 1, j) <= 1e-13 * scale) {
        k = j + 1;
        breakdown = true;
        break;
      }
      basis.col(j + 1) = w / hess(j + 1, j);
    }

    Eigen::EigenSolver<Mat> es(hess.topLeftCorner(k, k), true);
    Index best = 0;
    es.eigenvalues().cwiseAbs().maxCoeff(&best);
    const std::complex<double> theta = es.eigenvalues()(best);
    const Eigen::VectorXcd y = es.eigenvectors().col(best).normalized();
    const double rho = std::abs(theta);
    const double residual = breakdown ? 0.0 : hess(k, k - 1) * std::abs(y(k - 1));
    r.rho = rho;

    const bool settled = std::abs(rho - previous) < opt.tol * std::max(1.0, rho);
    if (breakdown || (settled && residual < 1e-9 * std::max(rho, scale * 1e-6))) {
      r.one_minus_rho = 1.0 - rho;
      return r;
    }
    previous = rho;

    // Restart from the plain power iterate Q^k v; unlike a Ritz vector it
    // never discards a dominant direction the Krylov space has not resolved.
    Vec c = Vec::Ones(1);
    for (Index j = 0; j < k; ++j) c = hess.topLeftCorner(j + 2, j + 1) * c;
    v = basis.leftCols(k + 1) * c;
    const double norm = v.norm();
    if (!(norm > 0.0)) throw Error(Errc::PowerIterationStalled, "power iteration lost its direction");
    v /= norm;
  }
  r.converged = false;
  r.one_minus_rho = 1.0 - r.rho;
  throw Error(Errc::PowerIterationStalled, "power iteration did not settle");
}

}  // namespace

SpectralReport spectral_radius(const Eigen::SparseMatrix<double>& q, SpectralMethod method,
                               const PowerOptions& options) {
  if (q.rows() != q.cols()) throw Error(Errc::InvalidInput, "Q must be square");
  switch (method) {
    case SpectralMethod::Dense: return dense_radius(q);
    case SpectralMethod::Power: return power_radius(q, options);
    case SpectralMethod::Auto:
      if (q.rows() <= options.dense_limit) return dense_radius(q);
      try {
        return power_radius(q, options);
      } catch (const Error& e) {
        if (e.code() != Errc::PowerIterationStalled) throw;
        return dense_radius(q);
      }
  }
  return dense_radius(q);
}

FixedPointMeans fixed_point_means(const ConvergenceSystem& system) {
  const Index n = system.b.size();
  FixedPointMeans out;
  if (n == 0) return out;
  Eigen::SparseMatrix<double> a(n, n);
  a.setIdentity();
  a += system.q;
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw Error(Errc::NearSingular, "I + Q is singular");
  out.z = lu.solve(system.b);
  if (lu.info() != Eigen::Success || !out.z.allFinite()) throw Error(Errc::NearSingular, "I + Q solve failed");
  out.residual = (a * out.z - system.b).norm() / std::max(1.0, system.b.norm());
  return out;
}

std::vector<Vec2> beliefs_from_slot_means(const FactorGraph& graph, const PrecisionFixedPoint& fp,
                                          const ConvergenceSystem& system, const Vec& z, double rcond) {
  require_vector_graph(graph);
  const auto unary = unary_precision(graph);
  const auto info = unary_information(graph);
  std::vector<Vec2> out(static_cast<std::size_t>(graph.bus_count), Vec2::Zero());
  for (const auto& var : graph.variables) {
    Mat precision = unary[static_cast<std::size_t>(var.id)];
    Vec eta = info[static_cast<std::size_t>(var.id)];
    for (Index a : var.edges) {
      const auto as = static_cast<std::size_t>(a);
      const auto& edge = graph.edges[as];
      const auto& f = graph.pairwise[static_cast<std::size_t>(edge.factor)];
      const Index u = other_position(f, edge.position);
      const Index eu = graph.edge_id(f.id, u);
      const Mat& h_t = f.blocks[static_cast<std::size_t>(edge.position)];
      const Mat& h_u = f.blocks[static_cast<std::size_t>(u)];
      precision += fp.to_variable[as];
      eta += h_t.transpose() * system.v_star_inv[as] * (f.z - h_u * z.segment(2 * eu, 2));
    }
    out[static_cast<std::size_t>(var.bus)] = robust_inverse(precision, rcond) * eta;
  }
  return out;
}

MessageStore frozen_store(const FactorGraph& graph, const PrecisionFixedPoint& fp, const Vec& z) {
  MessageStore store;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto dim = fp.to_factor[e].rows();
    store.moment_to_factor.push_back({z.segment(2 * static_cast<Index>(e), dim), fp.to_factor[e]});
    store.moment_to_variable.push_back({Vec::Zero(dim), fp.to_variable[e]});
  }
  return store;
}

Vec slot_means(const MessageStore& store, double rcond) {
  const Index edges = store.edge_count();
  Vec out(2 * edges);
  for (Index e = 0; e < edges; ++e) out.segment(2 * e, 2) = store.to_factor(e, rcond).mean;
  return out;
}

}  // namespace pmugbp
