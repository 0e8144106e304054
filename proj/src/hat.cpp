#include "evflow/hat.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "evflow/error.hpp"
#include "evflow/linalg.hpp"

namespace evflow {

namespace {

using Index = Eigen::Index;

// Cholesky of the information matrix X'WX; rejects singular designs.
Eigen::LLT<Eigen::MatrixXd> factor_information(const Eigen::MatrixXd& information) {
  Eigen::LLT<Eigen::MatrixXd> llt(information);
  const double floor = static_cast<double>(information.rows()) * std::numeric_limits<double>::epsilon();
  if (llt.info() != Eigen::Success || llt.rcond() < floor) {
    throw Error(ErrorCode::RankDeficient, "design matrix is not of full column rank");
  }
  return llt;
}

// Rows of X that belong to one trial.
Eigen::MatrixXd trial_design(const NmaDataset& dataset, TrialId trial) {
  const auto arms = dataset.trial_arms(trial);
  const auto basic = static_cast<Index>(dataset.num_treatments() - 1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Index>(arms.size()) - 1, basic);
  const auto base_col = dataset.basic_index(arms[0].treatment);
  for (std::size_t l = 1; l < arms.size(); ++l) {
    const auto row = static_cast<Index>(l) - 1;
    if (const auto col = dataset.basic_index(arms[l].treatment)) x(row, static_cast<Index>(*col)) = 1.0;
    if (base_col) x(row, static_cast<Index>(*base_col)) = -1.0;
  }
  return x;
}

}  // namespace

LabeledMatrix trial_hat(const LabeledMatrix& x, const LabeledMatrix& w) {
  if (x.rows() != w.rows() || w.rows() != w.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "X and W are not conformable");
  }
  const Eigen::MatrixXd xtw = x.values.transpose() * w.values;
  const auto llt = factor_information(xtw * x.values);
  return LabeledMatrix(x.col_kind, x.col_labels, x.row_kind, x.row_labels, llt.solve(xtw));
}

LabeledMatrix trial_hat(const NmaDataset& dataset, const ModelSpec& spec) {
  const auto basic = static_cast<Index>(dataset.num_treatments() - 1);
  const auto blocks = covariance_blocks(dataset, spec);
  std::vector<Eigen::MatrixXd> xtw(blocks.size());
  Eigen::MatrixXd information = Eigen::MatrixXd::Zero(basic, basic);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    Eigen::LLT<Eigen::MatrixXd> block_llt(blocks[i]);
    if (block_llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularCovariance,
                  "covariance of trial " + dataset.trial_labels()[i] + " is not positive definite");
    }
    const Eigen::MatrixXd x = trial_design(dataset, TrialId{i});
    // W_i X_i = Sigma_i^-1 X_i, so X_i' W_i is its transpose.
    xtw[i] = block_llt.solve(x).transpose();
    information.noalias() += xtw[i] * x;
  }
  const auto llt = factor_information(information);

  Eigen::MatrixXd h(basic, static_cast<Index>(dataset.num_contrasts()));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto offset = static_cast<Index>(dataset.contrast_offset(TrialId{i}));
    h.middleCols(offset, xtw[i].cols()) = llt.solve(xtw[i]);
  }
  return LabeledMatrix(LabelKind::Comparison, dataset.basic_comparison_labels(), LabelKind::Contrast,
                       dataset.contrast_labels(), std::move(h));
}

LabeledMatrix arm_hat(const LabeledMatrix& trial_hat, const LabeledMatrix& c) {
  if (trial_hat.cols() != c.rows()) throw Error(ErrorCode::DimensionMismatch, "H and C are not conformable");
  return LabeledMatrix(trial_hat.row_kind, trial_hat.row_labels, c.col_kind, c.col_labels, trial_hat.values * c.values);
}

LabeledMatrix arm_hat(const NmaDataset& dataset, const LabeledMatrix& trial_hat) {
  if (trial_hat.cols() != static_cast<Index>(dataset.num_contrasts())) {
    throw Error(ErrorCode::DimensionMismatch, "trial-level hat matrix does not match the dataset");
  }
  Eigen::MatrixXd h(trial_hat.rows(), static_cast<Index>(dataset.num_arms()));
  for (std::size_t i = 0; i < dataset.num_trials(); ++i) {
    const TrialId trial{i};
    const auto arms = static_cast<Index>(dataset.trial_arms(trial).size());
    const auto in = static_cast<Index>(dataset.contrast_offset(trial));
    const auto out = static_cast<Index>(dataset.arm_offset(trial));
    const auto block = trial_hat.values.middleCols(in, arms - 1);
    h.col(out) = -block.rowwise().sum();
    h.middleCols(out + 1, arms - 1) = block;
  }
  return LabeledMatrix(trial_hat.row_kind, trial_hat.row_labels, LabelKind::Arm, dataset.arm_labels(),
                       std::move(h));
}

LabeledRow expand_consistency(const LabeledMatrix& hat, const NmaDataset& dataset, TreatmentId from,
                              TreatmentId to) {
  if (from.index >= dataset.num_treatments() || to.index >= dataset.num_treatments()) {
    throw Error(ErrorCode::UnknownTreatment, "treatment index out of range");
  }
  if (hat.rows() != static_cast<Index>(dataset.num_treatments() - 1)) {
    throw Error(ErrorCode::DimensionMismatch, "hat matrix rows do not match the basic comparisons");
  }
  Eigen::VectorXd row = Eigen::VectorXd::Zero(hat.cols());
  if (const auto k = dataset.basic_index(to)) row += hat.values.row(static_cast<Index>(*k)).transpose();
  if (const auto j = dataset.basic_index(from)) row -= hat.values.row(static_cast<Index>(*j)).transpose();
  return LabeledRow{dataset.comparison_label(from, to), hat.col_kind, hat.col_labels, std::move(row)};
}

Eigen::MatrixXd pairwise_variances(const Eigen::VectorXd& arm_variances) {
  const Index n = arm_variances.size();
  Eigen::MatrixXd v = arm_variances.replicate(1, n) + arm_variances.transpose().replicate(n, 1);
  v.diagonal().setZero();
  return v;
}

Eigen::MatrixXd resistance_distances(const Eigen::MatrixXd& conductances) {
  const Index n = conductances.rows();
  Eigen::MatrixXd lap = -conductances;
  lap.diagonal() = conductances.rowwise().sum() - conductances.diagonal();
  // The null space is exactly the constant vector, so shift it out instead of
  // thresholding eigenvalues; a near-zero eigenvalue kept by a cutoff would
  // swamp the differences below.
  const Eigen::MatrixXd lp = linalg::laplacian_pinv_shifted(lap);
  const Eigen::VectorXd d = lp.diagonal();
  Eigen::MatrixXd r = d.replicate(1, n) + d.transpose().replicate(n, 1) - 2.0 * lp;
  r.diagonal().setZero();
  return r;
}

Eigen::MatrixXd adjust_multiarm_weights(const Eigen::MatrixXd& v) {
  const Index n = v.rows();
  if (n < 2 || v.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "pairwise variance table must be square with n >= 2");
  }
  if (n == 2) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2);
    w(0, 1) = w(1, 0) = 1.0 / v(0, 1);
    return w;
  }
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd lap_pinv = -0.5 * centering * v * centering;
  // Centring removes the constant vector, so the shifted inverse is exact.
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(lap_pinv + ones);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::NonrealizableTrial, "pairwise variances do not define a connected trial network");
  }
  Eigen::MatrixXd w = ones - lu.inverse();
  w.diagonal().setZero();

  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  const double diff = max_abs_diff(resistance_distances(w), v);
  if (!(diff <= std::sqrt(std::numeric_limits<double>::epsilon()) * scale)) {
    throw Error(ErrorCode::NonrealizableTrial,
                "adjusted weights reproduce the pairwise variances only to " + std::to_string(diff));
  }
  return w;
}

DirectEvidence direct_evidence(const NmaDataset& dataset, const ModelSpec& spec) {
  struct Accumulator {
    double weight{0.0};
    double weighted_sum{0.0};
  };
  std::map<std::pair<std::size_t, std::size_t>, Accumulator> pooled;
  const Eigen::VectorXd resistances = arm_resistances(dataset, spec);
  for (std::size_t i = 0; i < dataset.num_trials(); ++i) {
    const TrialId trial{i};
    const auto arms = dataset.trial_arms(trial);
    const auto offset = static_cast<Index>(dataset.arm_offset(trial));
    const auto n = static_cast<Index>(arms.size());
    const Eigen::MatrixXd w = adjust_multiarm_weights(pairwise_variances(resistances.segment(offset, n)));
    for (Index j = 0; j < n; ++j) {
      for (Index k = j + 1; k < n; ++k) {
        const auto& a = arms[static_cast<std::size_t>(j)];
        const auto& b = arms[static_cast<std::size_t>(k)];
        auto& acc = pooled[{a.treatment.index, b.treatment.index}];
        acc.weight += w(j, k);
        acc.weighted_sum += w(j, k) * (b.mean - a.mean);
      }
    }
  }

  DirectEvidence out;
  out.estimates.resize(static_cast<Index>(pooled.size()));
  out.weights.resize(static_cast<Index>(pooled.size()));
  Index e = 0;
  for (const auto& [pair, acc] : pooled) {
    const TreatmentId first{pair.first};
    const TreatmentId second{pair.second};
    out.edges.emplace_back(first, second);
    out.edge_labels.push_back(dataset.comparison_label(first, second));
    out.weights(e) = acc.weight;
    out.estimates(e) = acc.weighted_sum / acc.weight;
    ++e;
  }
  return out;
}

LabeledMatrix evidence_incidence(const NmaDataset& dataset, const DirectEvidence& evidence) {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(evidence.size());
  for (const auto& [a, b] : evidence.edges) {
    pairs.emplace_back(static_cast<Index>(a.index), static_cast<Index>(b.index));
  }
  return LabeledMatrix(LabelKind::Edge, evidence.edge_labels, LabelKind::Treatment, dataset.treatment_labels(),
                       linalg::oriented_incidence(static_cast<Index>(dataset.num_treatments()), pairs));
}

LabeledMatrix aggregate_hat(const LabeledMatrix& incidence, const DirectEvidence& evidence, Index baseline) {
  const Index nodes = incidence.cols();
  if (incidence.rows() != static_cast<Index>(evidence.size()) || baseline < 0 || baseline >= nodes) {
    throw Error(ErrorCode::DimensionMismatch, "incidence does not match the direct evidence");
  }
  const Eigen::MatrixXd btw = incidence.values.transpose() * evidence.weights.asDiagonal();
  const Eigen::MatrixXd lap_pinv = linalg::pseudo_inverse_symmetric(btw * incidence.values, 1);

  Eigen::MatrixXd cn = Eigen::MatrixXd::Zero(nodes - 1, nodes);
  std::vector<std::string> rows;
  for (Index j = 0, r = 0; j < nodes; ++j) {
    if (j == baseline) continue;
    cn(r, baseline) = -1.0;
    cn(r, j) = 1.0;
    rows.push_back(pair_label(incidence.col_labels[static_cast<std::size_t>(baseline)],
                              incidence.col_labels[static_cast<std::size_t>(j)]));
    ++r;
  }
  return LabeledMatrix(LabelKind::Comparison, std::move(rows), incidence.row_kind, incidence.row_labels,
                       cn * lap_pinv * btw);
}

HatMatrices compute_hat_matrices(const NmaDataset& dataset, const ModelSpec& spec) {
  HatMatrices out;
  out.trial_level = trial_hat(dataset, spec);
  out.arm_level = arm_hat(dataset, out.trial_level);
  const auto evidence = direct_evidence(dataset, spec);
  out.aggregate = aggregate_hat(evidence_incidence(dataset, evidence), evidence,
                                static_cast<Index>(dataset.baseline().index));
  out.basic_estimates = out.trial_level.values * contrast_observations(dataset);
  return out;
}

Estimates estimate_all(const NmaDataset& dataset, const ModelSpec& spec) {
  const auto hats = compute_hat_matrices(dataset, spec);
  const auto evidence = direct_evidence(dataset, spec);
  return Estimates{hats.basic_estimates, hats.arm_level.values * arm_means(dataset),
                   hats.aggregate.values * evidence.estimates};
}

}  // namespace evflow
