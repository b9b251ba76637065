#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace creditquote {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps continue until the off-diagonal Frobenius norm drops below
/// tol * ||m||_F. Throws std::invalid_argument on NaN entries or when
/// |m - m^T| exceeds tol * ||m||_F anywhere.
template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m,
                                        typename Derived::Scalar tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("min_eigenvalue: matrix must be square and non-empty");
  }
  if (m.hasNaN()) throw std::invalid_argument("min_eigenvalue: NaN entry");

  Dense a = m;
  const Eigen::Index n = a.rows();
  const Scalar scale = a.norm();
  if (scale == Scalar(0)) return Scalar(0);
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw std::invalid_argument("asymmetric matrix");
  }
  a = Scalar(0.5) * (a + a.transpose()).eval();

  auto off_norm = [&]() {
    Scalar s(0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) s += 2 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  // Stopping well below tol keeps the diagonal within tol of the spectrum.
  const Scalar target = std::min(tol, Scalar(1e-14)) * scale;
  for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (2 * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1));
        const Scalar c = 1 / std::sqrt(t * t + 1);
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = Scalar(0);
        a(q, p) = Scalar(0);
      }
    }
  }
  return a.diagonal().minCoeff();
}

/// argmin ||X theta - y||^2 + alpha ||theta||^2 via Cholesky of X^T X + alpha I.
Vec ridge_solve(const Mat& X, const Vec& y, double alpha);

/// Sample second-moment matrix (1/n) sum x x^T of the rows of X.
Mat second_moment(const Mat& X);

}  // namespace creditquote
