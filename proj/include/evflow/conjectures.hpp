#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <string>

#include "evflow/core.hpp"
#include "evflow/labeled_matrix.hpp"

namespace evflow {

/// sqrt(machine epsilon).
inline constexpr double kDefaultTolerance = 1.4901161193847656e-08;
inline constexpr double kEquivalenceTolerance = 1e-10;

struct VerificationReport {
  std::string name;
  double max_abs_diff{0.0};
  double tolerance{kDefaultTolerance};
  bool pass{true};
  Eigen::Index rows{0};
  Eigen::Index cols{0};
  std::chrono::duration<double, std::milli> elapsed{0};

  /// {name, max_abs_diff, tolerance, pass, dims:[r,c], elapsed_ms}
  [[nodiscard]] std::string to_json() const;
};

/// Elementwise comparison; pass iff the difference is below the tolerance.
VerificationReport compare_matrices(std::string name, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    double tolerance);

/// Arm-level hat matrix against the bipartite edge currents.
VerificationReport verify_conjecture1(const NmaDataset& dataset, const ModelSpec& spec,
                                      double tolerance = kDefaultTolerance);

/// T on the weighted projection against the renormalised two-step matrix.
VerificationReport verify_conjecture2(const NmaDataset& dataset, const ModelSpec& spec,
                                      double tolerance = kDefaultTolerance);

/// Source, sink and intermediate balances of the aggregate and arm-level
/// rows for one comparison.
VerificationReport verify_flow_conservation(const NmaDataset& dataset, const ModelSpec& spec, TreatmentId from,
                                            TreatmentId to, double tolerance = kEquivalenceTolerance);

/// Same checks for a caller-supplied row, e.g. a deliberately corrupted one.
VerificationReport check_row_conservation(std::string name, const LabeledMatrix& oriented_incidence,
                                          const Eigen::VectorXd& row, Eigen::Index source, Eigen::Index sink,
                                          double tolerance = kEquivalenceTolerance);

/// Pairwise agreement of the trial-level, arm-level and aggregate estimates.
VerificationReport verify_model_equivalence(const NmaDataset& dataset, const ModelSpec& spec,
                                            double tolerance = kEquivalenceTolerance);

}  // namespace evflow
