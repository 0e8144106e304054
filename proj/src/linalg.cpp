#include "evflow/linalg.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "evflow/error.hpp"

namespace evflow::linalg {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();

double cutoff(Eigen::Index rows, Eigen::Index cols, double largest) {
  return static_cast<double>(std::max(rows, cols)) * largest * kEps;
}
}  // namespace

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return Eigen::MatrixXd::Zero(a.cols(), a.rows());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = cutoff(a.rows(), a.cols(), s(0));
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd pseudo_inverse_symmetric(const Eigen::MatrixXd& a,
                                         std::optional<Eigen::Index> expected_nullity) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "symmetric pseudo-inverse needs a square matrix");
  }
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double largest = lambda.cwiseAbs().maxCoeff();
  const double tol = cutoff(a.rows(), a.cols(), largest);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  Eigen::Index nullity = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (std::abs(lambda(i)) > tol) {
      inv(i) = 1.0 / lambda(i);
    } else {
      ++nullity;
    }
  }
  if (expected_nullity && nullity != *expected_nullity) {
    throw Error(ErrorCode::RankDeficient, "expected nullity " + std::to_string(*expected_nullity) +
                                              ", found " + std::to_string(nullity));
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return v * inv.asDiagonal() * v.transpose();
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = cutoff(a.rows(), a.cols(), s(0));
  return (s.array() > tol).count();
}

Eigen::MatrixXd oriented_incidence(Eigen::Index nodes,
                                   std::span<const std::pair<Eigen::Index, Eigen::Index>> edges) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edges.size()), nodes);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    b(static_cast<Eigen::Index>(e), edges[e].first) = -1.0;
    b(static_cast<Eigen::Index>(e), edges[e].second) = 1.0;
  }
  return b;
}

Eigen::MatrixXd weighted_laplacian(Eigen::Index nodes,
                                   std::span<const std::pair<Eigen::Index, Eigen::Index>> edges,
                                   const Eigen::VectorXd& weights) {
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(nodes, nodes);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [j, k] = edges[e];
    const double w = weights(static_cast<Eigen::Index>(e));
    lap(j, j) += w;
    lap(k, k) += w;
    lap(j, k) -= w;
    lap(k, j) -= w;
  }
  return lap;
}

Eigen::MatrixXd laplacian_pinv_shifted(const Eigen::MatrixXd& laplacian) {
  const Eigen::Index n = laplacian.rows();
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  return (laplacian + ones).inverse() - ones;
}

}  // namespace evflow::linalg
