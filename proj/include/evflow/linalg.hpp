#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <utility>

namespace evflow::linalg {

/// Moore-Penrose pseudo-inverse of a general matrix. Singular values below
/// max(rows, cols) * sigma_max * eps are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a);

/// Pseudo-inverse of a symmetric matrix via its eigendecomposition, with the
/// same cutoff as pseudo_inverse. When expected_nullity is given, the number
/// of eigenvalues treated as zero must match it or RankDeficient is thrown.
Eigen::MatrixXd pseudo_inverse_symmetric(const Eigen::MatrixXd& a,
                                         std::optional<Eigen::Index> expected_nullity = std::nullopt);

/// Numerical rank with the pseudo_inverse cutoff.
Eigen::Index numerical_rank(const Eigen::MatrixXd& a);

/// Oriented edge-vertex incidence: row e has -1 at edges[e].first and +1 at
/// edges[e].second.
Eigen::MatrixXd oriented_incidence(Eigen::Index nodes,
                                   std::span<const std::pair<Eigen::Index, Eigen::Index>> edges);

/// Weighted Laplacian B' diag(w) B of an edge list.
Eigen::MatrixXd weighted_laplacian(Eigen::Index nodes,
                                   std::span<const std::pair<Eigen::Index, Eigen::Index>> edges,
                                   const Eigen::VectorXd& weights);

/// Laplacian pseudo-inverse through (L + 11'/n)^-1 - 11'/n. Valid only for
/// connected graphs; used to cross-check the eigendecomposition path.
Eigen::MatrixXd laplacian_pinv_shifted(const Eigen::MatrixXd& laplacian);

}  // namespace evflow::linalg
