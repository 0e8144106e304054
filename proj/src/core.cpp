#include "evflow/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "evflow/error.hpp"

namespace evflow {

ModelSpec ModelSpec::random(double tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidConfig, "tau must be finite and >= 0");
  }
  return ModelSpec{EffectModel::Random, tau};
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

NmaDataset NmaDataset::from_arms(std::vector<RawArm> rows, std::optional<std::string_view> baseline) {
  std::set<std::string> treatment_set;
  std::set<std::string> trial_set;
  for (const auto& row : rows) {
    if (!(row.variance > 0.0) || !std::isfinite(row.variance)) {
      throw Error(ErrorCode::NonpositiveVariance,
                  "arm " + pair_label(row.study, row.treatment) + " has variance " +
                      std::to_string(row.variance));
    }
    if (!std::isfinite(row.mean)) {
      throw Error(ErrorCode::Parse, "arm " + pair_label(row.study, row.treatment) + " has a non-finite mean");
    }
    treatment_set.insert(row.treatment);
    trial_set.insert(row.study);
  }

  NmaDataset ds;
  ds.treatments_.assign(treatment_set.begin(), treatment_set.end());
  ds.trials_.assign(trial_set.begin(), trial_set.end());
  if (ds.treatments_.empty()) throw Error(ErrorCode::SingleArmTrial, "dataset has no arms");

  const auto index_of = [](const std::vector<std::string>& sorted, const std::string& label) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), label) - sorted.begin());
  };

  ds.arms_.reserve(rows.size());
  for (const auto& row : rows) {
    ds.arms_.push_back(ArmObservation{TrialId{index_of(ds.trials_, row.study)},
                                      TreatmentId{index_of(ds.treatments_, row.treatment)}, row.mean,
                                      row.variance});
  }
  std::sort(ds.arms_.begin(), ds.arms_.end(), [](const ArmObservation& a, const ArmObservation& b) {
    return std::tie(a.trial, a.treatment) < std::tie(b.trial, b.treatment);
  });
  for (std::size_t a = 1; a < ds.arms_.size(); ++a) {
    if (ds.arms_[a].trial == ds.arms_[a - 1].trial && ds.arms_[a].treatment == ds.arms_[a - 1].treatment) {
      throw Error(ErrorCode::DuplicateArm, "arm " + ds.arm_label(ds.arms_[a]) + " appears more than once");
    }
  }

  ds.arm_offsets_.assign(ds.trials_.size() + 1, 0);
  for (const auto& arm : ds.arms_) ++ds.arm_offsets_[arm.trial.index + 1];
  for (std::size_t i = 0; i < ds.trials_.size(); ++i) {
    if (ds.arm_offsets_[i + 1] < 2) {
      throw Error(ErrorCode::SingleArmTrial, "trial " + ds.trials_[i] + " has fewer than two arms");
    }
    ds.arm_offsets_[i + 1] += ds.arm_offsets_[i];
  }

  // Every trial joins its treatments; one component means a connected network.
  std::vector<std::size_t> parent(ds.treatments_.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < ds.trials_.size(); ++i) {
    const std::size_t first = ds.arms_[ds.arm_offsets_[i]].treatment.index;
    for (std::size_t a = ds.arm_offsets_[i] + 1; a < ds.arm_offsets_[i + 1]; ++a) {
      parent[find_root(parent, ds.arms_[a].treatment.index)] = find_root(parent, first);
    }
  }
  const std::size_t root = find_root(parent, 0);
  for (std::size_t t = 1; t < parent.size(); ++t) {
    if (find_root(parent, t) != root) {
      throw Error(ErrorCode::DisconnectedNetwork,
                  "treatments " + ds.treatments_[0] + " and " + ds.treatments_[t] + " are not connected");
    }
  }

  if (baseline) {
    ds.baseline_ = ds.treatment(*baseline);
  }
  return ds;
}

std::span<const ArmObservation> NmaDataset::trial_arms(TrialId trial) const {
  const std::size_t begin = arm_offsets_.at(trial.index);
  const std::size_t end = arm_offsets_.at(trial.index + 1);
  return std::span<const ArmObservation>(arms_).subspan(begin, end - begin);
}

std::optional<TreatmentId> NmaDataset::find_treatment(std::string_view label) const {
  const auto it = std::lower_bound(treatments_.begin(), treatments_.end(), label);
  if (it == treatments_.end() || *it != label) return std::nullopt;
  return TreatmentId{static_cast<std::size_t>(it - treatments_.begin())};
}

TreatmentId NmaDataset::treatment(std::string_view label) const {
  auto t = find_treatment(label);
  if (!t) throw Error(ErrorCode::UnknownTreatment, "treatment '" + std::string(label) + "' is not in the network");
  return *t;
}

NmaDataset NmaDataset::with_baseline(TreatmentId baseline) const {
  if (baseline.index >= treatments_.size()) {
    throw Error(ErrorCode::UnknownTreatment, "baseline index out of range");
  }
  NmaDataset copy = *this;
  copy.baseline_ = baseline;
  return copy;
}

std::vector<TreatmentId> NmaDataset::basic_treatments() const {
  std::vector<TreatmentId> out;
  out.reserve(treatments_.size() - 1);
  for (std::size_t t = 0; t < treatments_.size(); ++t) {
    if (t != baseline_.index) out.push_back(TreatmentId{t});
  }
  return out;
}

std::optional<std::size_t> NmaDataset::basic_index(TreatmentId t) const {
  if (t == baseline_) return std::nullopt;
  return t.index < baseline_.index ? t.index : t.index - 1;
}

std::string NmaDataset::arm_label(const ArmObservation& arm) const {
  return pair_label(label(arm.trial), label(arm.treatment));
}

std::string NmaDataset::comparison_label(TreatmentId from, TreatmentId to) const {
  return pair_label(label(from), label(to));
}

std::vector<std::string> NmaDataset::basic_comparison_labels() const {
  std::vector<std::string> out;
  for (const auto t : basic_treatments()) out.push_back(comparison_label(baseline_, t));
  return out;
}

std::vector<std::string> NmaDataset::arm_labels() const {
  std::vector<std::string> out;
  out.reserve(arms_.size());
  for (const auto& arm : arms_) out.push_back(arm_label(arm));
  return out;
}

std::vector<std::string> NmaDataset::contrast_labels() const {
  std::vector<std::string> out;
  out.reserve(num_contrasts());
  for (std::size_t i = 0; i < trials_.size(); ++i) {
    const auto arms = trial_arms(TrialId{i});
    for (std::size_t l = 1; l < arms.size(); ++l) {
      out.push_back(trials_[i] + ":" + comparison_label(arms[0].treatment, arms[l].treatment));
    }
  }
  return out;
}

LogOdds log_odds(double events, double total) {
  const double non_events = total - events;
  return LogOdds{std::log(events / non_events), 1.0 / events + 1.0 / non_events};
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (const char c : line) {
    if (c == '"') {
      quoted = !quoted;
      current += c;
    } else if (c == ',' && !quoted) {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(trim(current));
  return fields;
}

double parse_number(const std::string& field, std::size_t line_no, std::string_view column) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": column '" + std::string(column) +
                                      "' is not a number: '" + field + "'");
  }
  return value;
}

struct BinomialRow {
  std::string study;
  std::string treatment;
  double events;
  double total;
};

}  // namespace

NmaDataset parse_arm_csv(std::istream& in, const IngestOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0] = header[0].substr(3);
  const auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto require = [&](std::string_view name) {
    auto c = column(name);
    if (!c) throw Error(ErrorCode::MissingColumn, "header lacks column '" + std::string(name) + "'");
    return *c;
  };

  const std::size_t study_col = require("study");
  const std::size_t treatment_col = require("treatment");
  const bool binomial = !column("mean") && column("events");
  const std::size_t a_col = binomial ? require("events") : require("mean");
  const std::size_t b_col = binomial ? require("total") : require("variance");
  const std::string_view a_name = binomial ? "events" : "mean";
  const std::string_view b_name = binomial ? "total" : "variance";

  std::vector<RawArm> arms;
  std::vector<BinomialRow> counts;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::size_t needed = std::max({study_col, treatment_col, a_col, b_col}) + 1;
    if (fields.size() < needed) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(header.size()));
    }
    const double a = parse_number(fields[a_col], line_no, a_name);
    const double b = parse_number(fields[b_col], line_no, b_name);
    if (binomial) {
      if (a < 0.0 || b <= 0.0 || a > b) {
        throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": events must lie in [0, total]");
      }
      counts.push_back(BinomialRow{fields[study_col], fields[treatment_col], a, b});
    } else {
      arms.push_back(RawArm{fields[study_col], fields[treatment_col], a, b});
    }
  }

  if (binomial) {
    std::set<std::string> corrected;
    for (const auto& row : counts) {
      if (row.events == 0.0 || row.events == row.total) {
        if (!options.continuity_correction) {
          throw Error(ErrorCode::ZeroOrFullEvents,
                      "arm " + pair_label(row.study, row.treatment) +
                          " has zero or all events; enable the continuity correction");
        }
        corrected.insert(row.study);
      }
    }
    for (const auto& row : counts) {
      const double cc = corrected.contains(row.study) ? 0.5 : 0.0;
      const auto lo = log_odds(row.events + cc, row.total + 2.0 * cc);
      arms.push_back(RawArm{row.study, row.treatment, lo.mean, lo.variance});
    }
  }

  std::optional<std::string_view> baseline;
  if (options.baseline) baseline = *options.baseline;
  return NmaDataset::from_arms(std::move(arms), baseline);
}

NmaDataset load_arm_csv(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, "cannot open " + path.string());
  return parse_arm_csv(in, options);
}

void write_arm_csv(std::ostream& out, const NmaDataset& dataset) {
  out << "study,treatment,mean,variance\n";
  out << std::setprecision(17);
  for (const auto& arm : dataset.arms()) {
    out << dataset.label(arm.trial) << ',' << dataset.label(arm.treatment) << ',' << arm.mean << ','
        << arm.variance << '\n';
  }
}

LabeledMatrix build_contrast_map(const NmaDataset& dataset) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dataset.num_contrasts()),
                                            static_cast<Eigen::Index>(dataset.num_arms()));
  for (std::size_t i = 0; i < dataset.num_trials(); ++i) {
    const TrialId trial{i};
    const auto arms = dataset.trial_arms(trial);
    const auto row0 = static_cast<Eigen::Index>(dataset.contrast_offset(trial));
    const auto col0 = static_cast<Eigen::Index>(dataset.arm_offset(trial));
    for (Eigen::Index l = 1; l < static_cast<Eigen::Index>(arms.size()); ++l) {
      c(row0 + l - 1, col0) = -1.0;
      c(row0 + l - 1, col0 + l) = 1.0;
    }
  }
  return LabeledMatrix(LabelKind::Contrast, dataset.contrast_labels(), LabelKind::Arm, dataset.arm_labels(),
                       std::move(c));
}

LabeledMatrix build_design_matrix(const NmaDataset& dataset) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dataset.num_contrasts()),
                                            static_cast<Eigen::Index>(dataset.num_treatments() - 1));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < dataset.num_trials(); ++i) {
    const auto arms = dataset.trial_arms(TrialId{i});
    const auto base_col = dataset.basic_index(arms[0].treatment);
    for (std::size_t l = 1; l < arms.size(); ++l, ++row) {
      if (const auto col = dataset.basic_index(arms[l].treatment)) x(row, static_cast<Eigen::Index>(*col)) = 1.0;
      if (base_col) x(row, static_cast<Eigen::Index>(*base_col)) = -1.0;
    }
  }
  return LabeledMatrix(LabelKind::Contrast, dataset.contrast_labels(), LabelKind::Comparison,
                       dataset.basic_comparison_labels(), std::move(x));
}

LabeledMatrix build_baseline_contrasts(const NmaDataset& dataset) {
  const auto basics = dataset.basic_treatments();
  Eigen::MatrixXd cn = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(basics.size()),
                                             static_cast<Eigen::Index>(dataset.num_treatments()));
  for (std::size_t r = 0; r < basics.size(); ++r) {
    cn(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(dataset.baseline().index)) = -1.0;
    cn(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(basics[r].index)) = 1.0;
  }
  return LabeledMatrix(LabelKind::Comparison, dataset.basic_comparison_labels(), LabelKind::Treatment,
                       dataset.treatment_labels(), std::move(cn));
}

std::vector<Eigen::MatrixXd> covariance_blocks(const NmaDataset& dataset, const ModelSpec& spec) {
  const double tau_sq = spec.tau_sq();
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(dataset.num_trials());
  for (std::size_t i = 0; i < dataset.num_trials(); ++i) {
    const auto arms = dataset.trial_arms(TrialId{i});
    const auto n = static_cast<Eigen::Index>(arms.size()) - 1;
    const double shared = arms[0].variance + tau_sq / 2.0;
    Eigen::MatrixXd block = Eigen::MatrixXd::Constant(n, n, shared);
    for (Eigen::Index l = 0; l < n; ++l) {
      block(l, l) = arms[0].variance + arms[static_cast<std::size_t>(l) + 1].variance + tau_sq;
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

Covariance build_covariance(const NmaDataset& dataset, const ModelSpec& spec) {
  const auto k = static_cast<Eigen::Index>(dataset.num_contrasts());
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(k, k);
  const auto blocks = covariance_blocks(dataset, spec);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto offset = static_cast<Eigen::Index>(dataset.contrast_offset(TrialId{i}));
    const auto& block = blocks[i];
    Eigen::LLT<Eigen::MatrixXd> llt(block);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularCovariance, "covariance of trial " + dataset.trial_labels()[i] +
                                                     " is not positive definite");
    }
    sigma.block(offset, offset, block.rows(), block.cols()) = block;
    weights.block(offset, offset, block.rows(), block.cols()) =
        llt.solve(Eigen::MatrixXd::Identity(block.rows(), block.cols()));
  }
  auto labels = dataset.contrast_labels();
  return Covariance{LabeledMatrix(LabelKind::Contrast, labels, LabelKind::Contrast, labels, std::move(sigma)),
                    LabeledMatrix(LabelKind::Contrast, labels, LabelKind::Contrast, labels, std::move(weights))};
}

Eigen::VectorXd arm_means(const NmaDataset& dataset) {
  Eigen::VectorXd mu(static_cast<Eigen::Index>(dataset.num_arms()));
  for (std::size_t a = 0; a < dataset.num_arms(); ++a) mu(static_cast<Eigen::Index>(a)) = dataset.arms()[a].mean;
  return mu;
}

Eigen::VectorXd contrast_observations(const NmaDataset& dataset) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(dataset.num_contrasts()));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < dataset.num_trials(); ++i) {
    const auto arms = dataset.trial_arms(TrialId{i});
    for (std::size_t l = 1; l < arms.size(); ++l) y(row++) = arms[l].mean - arms[0].mean;
  }
  return y;
}

Eigen::VectorXd arm_resistances(const NmaDataset& dataset, const ModelSpec& spec) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(dataset.num_arms()));
  const double half_tau_sq = spec.tau_sq() / 2.0;
  for (std::size_t a = 0; a < dataset.num_arms(); ++a) {
    r(static_cast<Eigen::Index>(a)) = dataset.arms()[a].variance + half_tau_sq;
  }
  return r;
}

}  // namespace evflow
