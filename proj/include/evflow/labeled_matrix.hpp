#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evflow {

/// What a row or column of a LabeledMatrix stands for.
enum class LabelKind {
  Treatment,   // v_j
  Trial,       // u_i
  Node,        // trials then treatments (bipartite node set)
  Comparison,  // [v_j,v_k] relative effect
  Contrast,    // within-trial contrast against the trial baseline
  Arm,         // [u_i,v_j]
  Edge,        // unipartite edge [v_j,v_k]
};

std::string_view to_string(LabelKind kind) noexcept;

/// Dense real matrix whose rows and columns carry typed labels.
struct LabeledMatrix {
  LabelKind row_kind{LabelKind::Comparison};
  LabelKind col_kind{LabelKind::Comparison};
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::MatrixXd values;

  LabeledMatrix() = default;
  LabeledMatrix(LabelKind rk, std::vector<std::string> rl, LabelKind ck, std::vector<std::string> cl,
                Eigen::MatrixXd v);

  [[nodiscard]] Eigen::Index rows() const noexcept { return values.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return values.cols(); }
  [[nodiscard]] std::optional<Eigen::Index> row_index(std::string_view label) const;
  [[nodiscard]] std::optional<Eigen::Index> col_index(std::string_view label) const;
  [[nodiscard]] double at(std::string_view row, std::string_view col) const;
};

/// One labeled row, e.g. a consistency-expanded hat-matrix row.
struct LabeledRow {
  std::string name;
  LabelKind kind{LabelKind::Arm};
  std::vector<std::string> labels;
  Eigen::VectorXd values;

  [[nodiscard]] double at(std::string_view label) const;
};

/// Largest absolute elementwise difference; throws DimensionMismatch when the
/// shapes differ.
double max_abs_diff(const LabeledMatrix& a, const LabeledMatrix& b);
double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// "[a,b]" style pair label used for comparisons, arms and edges.
std::string pair_label(std::string_view first, std::string_view second);

}  // namespace evflow
