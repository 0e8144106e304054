#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evflow/labeled_matrix.hpp"

namespace evflow {

/// Position of a treatment in the dataset's sorted treatment list.
struct TreatmentId {
  std::size_t index{0};
  auto operator<=>(const TreatmentId&) const = default;
};

/// Position of a trial in the dataset's sorted trial list.
struct TrialId {
  std::size_t index{0};
  auto operator<=>(const TrialId&) const = default;
};

struct ArmObservation {
  TrialId trial;
  TreatmentId treatment;
  double mean{0.0};      // log-odds
  double variance{0.0};  // squared log-odds, > 0
};

/// An arm row as it appears in an input file, before validation.
struct RawArm {
  std::string study;
  std::string treatment;
  double mean{0.0};
  double variance{0.0};
};

enum class EffectModel { Common, Random };

struct ModelSpec {
  EffectModel effect_model{EffectModel::Common};
  double tau{0.0};  // between-trial SD; must be 0 for the common-effect model

  static ModelSpec common() { return {}; }
  static ModelSpec random(double tau);
  [[nodiscard]] double tau_sq() const noexcept { return tau * tau; }
};

/// Validated NMA dataset. Treatments and trials are sorted by label; arms are
/// stored trial-major with treatments ascending inside each trial, so the
/// first arm of a trial is its trial-specific baseline.
class NmaDataset {
 public:
  /// Validates and canonicalises. Throws DuplicateArm, SingleArmTrial,
  /// DisconnectedNetwork, NonpositiveVariance or UnknownTreatment (baseline).
  static NmaDataset from_arms(std::vector<RawArm> rows,
                              std::optional<std::string_view> baseline = std::nullopt);

  [[nodiscard]] std::size_t num_treatments() const noexcept { return treatments_.size(); }
  [[nodiscard]] std::size_t num_trials() const noexcept { return trials_.size(); }
  [[nodiscard]] std::size_t num_arms() const noexcept { return arms_.size(); }
  /// Sum over trials of (arms - 1).
  [[nodiscard]] std::size_t num_contrasts() const noexcept { return arms_.size() - trials_.size(); }

  [[nodiscard]] const std::vector<std::string>& treatment_labels() const noexcept { return treatments_; }
  [[nodiscard]] const std::vector<std::string>& trial_labels() const noexcept { return trials_; }
  [[nodiscard]] const std::string& label(TreatmentId t) const { return treatments_.at(t.index); }
  [[nodiscard]] const std::string& label(TrialId t) const { return trials_.at(t.index); }

  [[nodiscard]] std::span<const ArmObservation> arms() const noexcept { return arms_; }
  [[nodiscard]] std::span<const ArmObservation> trial_arms(TrialId trial) const;
  /// Index of the first arm of the trial in arms().
  [[nodiscard]] std::size_t arm_offset(TrialId trial) const { return arm_offsets_.at(trial.index); }
  /// Index of the first contrast row of the trial in C, X and Sigma.
  [[nodiscard]] std::size_t contrast_offset(TrialId trial) const {
    return arm_offsets_.at(trial.index) - trial.index;
  }

  [[nodiscard]] TreatmentId baseline() const noexcept { return baseline_; }
  [[nodiscard]] std::optional<TreatmentId> find_treatment(std::string_view label) const;
  /// Like find_treatment but throws UnknownTreatment.
  [[nodiscard]] TreatmentId treatment(std::string_view label) const;
  [[nodiscard]] NmaDataset with_baseline(TreatmentId baseline) const;

  /// Non-baseline treatments in label order; row j of every hat matrix is
  /// the comparison (baseline, basic_treatments()[j]).
  [[nodiscard]] std::vector<TreatmentId> basic_treatments() const;
  /// Column of treatment t among the basic parameters, or nullopt for the baseline.
  [[nodiscard]] std::optional<std::size_t> basic_index(TreatmentId t) const;

  [[nodiscard]] std::string arm_label(const ArmObservation& arm) const;
  [[nodiscard]] std::string comparison_label(TreatmentId from, TreatmentId to) const;

  /// Row labels shared by all hat matrices: [baseline, v_j].
  [[nodiscard]] std::vector<std::string> basic_comparison_labels() const;
  [[nodiscard]] std::vector<std::string> arm_labels() const;
  [[nodiscard]] std::vector<std::string> contrast_labels() const;

 private:
  std::vector<std::string> treatments_;
  std::vector<std::string> trials_;
  std::vector<ArmObservation> arms_;
  std::vector<std::size_t> arm_offsets_;  // size trials + 1
  TreatmentId baseline_{};
};

struct IngestOptions {
  /// Add 0.5 to both cells of every arm in a trial that has an arm with zero
  /// events or all events. Without it such rows raise ZeroOrFullEvents.
  bool continuity_correction{false};
  std::optional<std::string> baseline;
};

/// Log-odds of events/total and its variance 1/r + 1/(n-r).
struct LogOdds {
  double mean;
  double variance;
};
LogOdds log_odds(double events, double total);

/// Reads schema A (study,treatment,mean,variance) or schema B
/// (study,treatment,events,total). Throws MissingColumn, Parse,
/// ZeroOrFullEvents and every NmaDataset::from_arms error.
NmaDataset parse_arm_csv(std::istream& in, const IngestOptions& options = {});
NmaDataset load_arm_csv(const std::filesystem::path& path, const IngestOptions& options = {});

/// Writes schema A with full precision.
void write_arm_csv(std::ostream& out, const NmaDataset& dataset);

/// C: contrasts x arms, per-trial blocks [-1 | I].
LabeledMatrix build_contrast_map(const NmaDataset& dataset);

/// X: contrasts x basic parameters.
LabeledMatrix build_design_matrix(const NmaDataset& dataset);

/// C_N: basic comparisons x treatments, -1 at the baseline and +1 at v_j.
LabeledMatrix build_baseline_contrasts(const NmaDataset& dataset);

/// Per-trial blocks of Sigma + Omega, (n_i - 1) square each.
std::vector<Eigen::MatrixXd> covariance_blocks(const NmaDataset& dataset, const ModelSpec& spec);

struct Covariance {
  LabeledMatrix covariance;  // Sigma + Omega
  LabeledMatrix weights;     // W = (Sigma + Omega)^-1
};

/// Dense block-diagonal covariance and its inverse. Throws SingularCovariance
/// if a block is not positive definite.
Covariance build_covariance(const NmaDataset& dataset, const ModelSpec& spec);

/// Arm means mu in arm order.
Eigen::VectorXd arm_means(const NmaDataset& dataset);

/// Contrast observations y = C mu in contrast order.
Eigen::VectorXd contrast_observations(const NmaDataset& dataset);

/// Arm-level variance sigma^2 + tau^2/2 in arm order.
Eigen::VectorXd arm_resistances(const NmaDataset& dataset, const ModelSpec& spec);

}  // namespace evflow
