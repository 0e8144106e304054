#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "evflow/core.hpp"
#include "evflow/labeled_matrix.hpp"

namespace evflow {

/// Pooled pairwise evidence, one entry per treatment pair compared in at
/// least one trial. Edges are ordered by (first, second) treatment index with
/// first < second.
struct DirectEvidence {
  std::vector<std::pair<TreatmentId, TreatmentId>> edges;
  std::vector<std::string> edge_labels;
  Eigen::VectorXd estimates;  // direct log-odds ratio, second vs first
  Eigen::VectorXd weights;    // pooled (adjusted) inverse variance

  [[nodiscard]] std::size_t size() const noexcept { return edges.size(); }
};

struct HatMatrices {
  LabeledMatrix trial_level;  // (N-1) x contrasts
  LabeledMatrix arm_level;    // (N-1) x arms
  LabeledMatrix aggregate;    // (N-1) x unipartite edges
  Eigen::VectorXd basic_estimates;
};

struct Estimates {
  Eigen::VectorXd trial_level;  // H y
  Eigen::VectorXd arm_level;    // H_arm mu
  Eigen::VectorXd aggregate;    // H_agg theta_dir
};

/// (X'WX)^-1 X'W through a Cholesky solve. Throws RankDeficient.
LabeledMatrix trial_hat(const LabeledMatrix& x, const LabeledMatrix& w);

/// Same matrix assembled trial by trial without forming X or W densely.
LabeledMatrix trial_hat(const NmaDataset& dataset, const ModelSpec& spec);

/// H C.
LabeledMatrix arm_hat(const LabeledMatrix& trial_hat, const LabeledMatrix& c);

/// H C using the block structure of C; agrees with the dense product to rounding.
LabeledMatrix arm_hat(const NmaDataset& dataset, const LabeledMatrix& trial_hat);

/// Row (from, to) = row(baseline, to) - row(baseline, from) of a hat matrix
/// whose rows are the basic comparisons of `dataset`.
LabeledRow expand_consistency(const LabeledMatrix& hat, const NmaDataset& dataset, TreatmentId from,
                              TreatmentId to);

/// Pairwise contrast variances v_jk = r_j + r_k from arm-level variances
/// r = sigma^2 + tau^2/2.
Eigen::MatrixXd pairwise_variances(const Eigen::VectorXd& arm_variances);

/// Conductances of a complete graph whose resistance distances equal the
/// pairwise variances V (zero diagonal). Diagonal of the result is zero.
/// Throws NonrealizableTrial when the round trip misses V.
Eigen::MatrixXd adjust_multiarm_weights(const Eigen::MatrixXd& pairwise_variances);

/// Resistance distances of a weighted complete graph given as a symmetric
/// conductance matrix.
Eigen::MatrixXd resistance_distances(const Eigen::MatrixXd& conductances);

DirectEvidence direct_evidence(const NmaDataset& dataset, const ModelSpec& spec);

/// Oriented unipartite incidence of the evidence edges: -1 at the first
/// treatment, +1 at the second.
LabeledMatrix evidence_incidence(const NmaDataset& dataset, const DirectEvidence& evidence);

/// C_N (B' W B)^+ B' W with C_N built against column `baseline` of the
/// incidence. Throws RankDeficient for disconnected graphs.
LabeledMatrix aggregate_hat(const LabeledMatrix& incidence, const DirectEvidence& evidence,
                            Eigen::Index baseline = 0);

HatMatrices compute_hat_matrices(const NmaDataset& dataset, const ModelSpec& spec);

Estimates estimate_all(const NmaDataset& dataset, const ModelSpec& spec);

}  // namespace evflow
