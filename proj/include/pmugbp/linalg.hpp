#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>

#include "pmugbp/errors.hpp"

namespace pmugbp {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

using Vec = Vector<double>;
using Mat = Matrix<double>;
using Vec2 = Vector2<double>;
using Mat2 = Matrix2<double>;

inline constexpr double kDefaultRcond = 1e-12;

template <typename Derived>
Matrix<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

namespace detail {

template <typename Scalar, typename Values, typename Vectors>
std::optional<Matrix<Scalar>> truncated_inverse(const Values& lambda, const Vectors& basis,
                                                Scalar rcond) {
  const Scalar sigma_max = lambda.cwiseAbs().maxCoeff();
  if (!(sigma_max > Scalar(0))) return std::nullopt;
  const Scalar cutoff = rcond * sigma_max;
  Vector<Scalar> inv(lambda.size());
  for (Index k = 0; k < lambda.size(); ++k) {
    inv(k) = std::abs(lambda(k)) > cutoff ? Scalar(1) / lambda(k) : Scalar(0);
  }
  Matrix<Scalar> out = basis * inv.asDiagonal() * basis.transpose();
  return symmetrized(out);
}

}  // namespace detail

/// Pseudo-inverse of a symmetric matrix. Singular values below
/// `rcond * sigma_max` are dropped; for symmetric input the singular values
/// are the absolute eigenvalues, so a symmetric eigendecomposition stands in
/// for the SVD. Returns nullopt when the matrix is exactly zero.
template <typename Derived>
std::optional<Matrix<typename Derived::Scalar>> try_robust_inverse(
    const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar rcond = kDefaultRcond) {
  using Scalar = typename Derived::Scalar;
  const Index n = m.rows();
  if (n == 0) return Matrix<Scalar>(0, 0);
  if (n == 1) {
    const Scalar s = m(0, 0);
    if (s == Scalar(0)) return std::nullopt;
    return Matrix<Scalar>::Constant(1, 1, Scalar(1) / s);
  }
  if (n == 2) {
    const Matrix2<Scalar> sym = symmetrized(m);
    if (sym.isZero(0)) return std::nullopt;
    // Scale first: computeDirect loses accuracy on badly scaled input.
    const Scalar scale = sym.cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Matrix2<Scalar>> es;
    es.computeDirect(sym / scale);
    auto inv = detail::truncated_inverse<Scalar>(es.eigenvalues(), es.eigenvectors(), rcond);
    if (inv) *inv /= scale;
    return inv;
  }
  const Matrix<Scalar> sym = symmetrized(m);
  if (sym.isZero(0)) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
  return detail::truncated_inverse<Scalar>(es.eigenvalues(), es.eigenvectors(), rcond);
}

template <typename Derived>
Matrix<typename Derived::Scalar> robust_inverse(const Eigen::MatrixBase<Derived>& m,
                                                typename Derived::Scalar rcond = kDefaultRcond) {
  auto inv = try_robust_inverse(m, rcond);
  if (!inv) throw Error(Errc::AllSingular, "robust_inverse: all singular values are zero");
  return std::move(*inv);
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0) return Scalar(0);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Derived>
bool is_spd(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Matrix<typename Derived::Scalar>> llt(m);
  return llt.info() == Eigen::Success && min_eigenvalue(m) > 0;
}

}  // namespace pmugbp
