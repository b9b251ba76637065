#include "creditquote/linalg.hpp"

namespace creditquote {

Vec ridge_solve(const Mat& X, const Vec& y, double alpha) {
  if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("ridge_solve: empty design");
  if (X.rows() != y.size()) throw std::invalid_argument("ridge_solve: dimension mismatch");
  if (!(alpha >= 0.0)) throw std::invalid_argument("ridge_solve: alpha must be >= 0");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("ridge_solve: non-finite input");

  Mat gram = X.transpose() * X;
  gram.diagonal().array() += alpha;
  Eigen::LLT<Mat> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("rank deficient");
  if (alpha == 0.0) {
    // LLT succeeds on numerically singular Gram matrices; check the pivots.
    const Vec diag = Mat(llt.matrixL()).diagonal();
    const double ratio = diag.minCoeff() / diag.maxCoeff();
    if (!(ratio * ratio > 1e-13)) throw std::runtime_error("rank deficient");
  }
  return llt.solve(X.transpose() * y);
}

Mat second_moment(const Mat& X) {
  if (X.rows() == 0) return Mat::Zero(X.cols(), X.cols());
  return (X.transpose() * X) / static_cast<double>(X.rows());
}

}  // namespace creditquote
