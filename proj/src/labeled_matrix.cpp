#include "evflow/labeled_matrix.hpp"

#include <algorithm>

#include "evflow/error.hpp"

namespace evflow {

std::string_view to_string(LabelKind kind) noexcept {
  switch (kind) {
    case LabelKind::Treatment: return "treatment";
    case LabelKind::Trial: return "trial";
    case LabelKind::Node: return "node";
    case LabelKind::Comparison: return "comparison";
    case LabelKind::Contrast: return "contrast";
    case LabelKind::Arm: return "arm";
    case LabelKind::Edge: return "edge";
  }
  return "unknown";
}

LabeledMatrix::LabeledMatrix(LabelKind rk, std::vector<std::string> rl, LabelKind ck,
                             std::vector<std::string> cl, Eigen::MatrixXd v)
    : row_kind(rk), col_kind(ck), row_labels(std::move(rl)), col_labels(std::move(cl)),
      values(std::move(v)) {
  if (static_cast<Eigen::Index>(row_labels.size()) != values.rows() ||
      static_cast<Eigen::Index>(col_labels.size()) != values.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "label counts " + std::to_string(row_labels.size()) + "x" +
                    std::to_string(col_labels.size()) + " do not match matrix " +
                    std::to_string(values.rows()) + "x" + std::to_string(values.cols()));
  }
}

namespace {
std::optional<Eigen::Index> find_label(const std::vector<std::string>& labels, std::string_view label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - labels.begin());
}
}  // namespace

std::optional<Eigen::Index> LabeledMatrix::row_index(std::string_view label) const {
  return find_label(row_labels, label);
}

std::optional<Eigen::Index> LabeledMatrix::col_index(std::string_view label) const {
  return find_label(col_labels, label);
}

double LabeledMatrix::at(std::string_view row, std::string_view col) const {
  const auto r = row_index(row);
  const auto c = col_index(col);
  if (!r || !c) {
    throw Error(ErrorCode::DimensionMismatch,
                "no entry (" + std::string(row) + ", " + std::string(col) + ")");
  }
  return values(*r, *c);
}

double LabeledRow::at(std::string_view label) const {
  const auto i = find_label(labels, label);
  if (!i) throw Error(ErrorCode::DimensionMismatch, "no entry " + std::string(label) + " in " + name);
  return values(*i);
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

double max_abs_diff(const LabeledMatrix& a, const LabeledMatrix& b) {
  return max_abs_diff(a.values, b.values);
}

std::string pair_label(std::string_view first, std::string_view second) {
  std::string out;
  out.reserve(first.size() + second.size() + 3);
  out += '[';
  out += first;
  out += ',';
  out += second;
  out += ']';
  return out;
}

}  // namespace evflow
