#include "evflow/conjectures.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "evflow/electrical.hpp"
#include "evflow/graphs.hpp"
#include "evflow/hat.hpp"
#include "evflow/randomwalk.hpp"

namespace evflow {

namespace {

using Clock = std::chrono::steady_clock;

VerificationReport finish(std::string name, double diff, double tolerance, Eigen::Index rows, Eigen::Index cols,
                          Clock::time_point start) {
  VerificationReport r;
  r.name = std::move(name);
  r.max_abs_diff = diff;
  r.tolerance = tolerance;
  r.pass = diff < tolerance;  // NaN fails
  r.rows = rows;
  r.cols = cols;
  r.elapsed = Clock::now() - start;
  return r;
}

}  // namespace

std::string VerificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["max_abs_diff"] = max_abs_diff;
  j["tolerance"] = tolerance;
  j["pass"] = pass;
  j["dims"] = {rows, cols};
  j["elapsed_ms"] = elapsed.count();
  return j.dump();
}

VerificationReport compare_matrices(std::string name, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    double tolerance) {
  const auto start = Clock::now();
  return finish(std::move(name), max_abs_diff(a, b), tolerance, a.rows(), a.cols(), start);
}

VerificationReport verify_conjecture1(const NmaDataset& dataset, const ModelSpec& spec, double tolerance) {
  const auto start = Clock::now();
  const auto h_arm = arm_hat(dataset, trial_hat(dataset, spec));
  const auto graph = bipartite_from_dataset(dataset, spec);
  const auto currents = edge_currents(incidence(graph), resistance_matrix(dataset, spec),
                                      nodal_current_matrix(graph, dataset.baseline()));
  return finish("conjecture1", max_abs_diff(h_arm.values, currents.values), tolerance, h_arm.rows(), h_arm.cols(),
                start);
}

VerificationReport verify_conjecture2(const NmaDataset& dataset, const ModelSpec& spec, double tolerance) {
  const auto start = Clock::now();
  const auto graph = bipartite_from_dataset(dataset, spec);
  const auto t = transition_unipartite(unipartite_projection(graph, direct_evidence(dataset, spec)));
  const auto p = renormalize(two_step(transition_up(graph), transition_down(graph)));
  return finish("conjecture2", max_abs_diff(t.values, p.values), tolerance, t.rows(), t.cols(), start);
}

VerificationReport check_row_conservation(std::string name, const LabeledMatrix& oriented_incidence,
                                          const Eigen::VectorXd& row, Eigen::Index source, Eigen::Index sink,
                                          double tolerance) {
  const auto start = Clock::now();
  const double residual = conservation_residual(oriented_incidence.values, row, source, sink);
  return finish(std::move(name), residual, tolerance, 1, row.size(), start);
}

VerificationReport verify_flow_conservation(const NmaDataset& dataset, const ModelSpec& spec, TreatmentId from,
                                            TreatmentId to, double tolerance) {
  const auto start = Clock::now();
  const auto hats = compute_hat_matrices(dataset, spec);
  const auto evidence = direct_evidence(dataset, spec);
  const auto graph = bipartite_from_dataset(dataset, spec);
  const auto uni = unipartite_projection(graph, evidence);

  const auto agg_row = expand_consistency(hats.aggregate, dataset, from, to);
  const auto arm_row = expand_consistency(hats.arm_level, dataset, from, to);
  const auto m = static_cast<Eigen::Index>(dataset.num_trials());
  const double agg = conservation_residual(incidence(uni).values, agg_row.values, static_cast<Eigen::Index>(from.index),
                                           static_cast<Eigen::Index>(to.index));
  const double arm = conservation_residual(incidence(graph).values, arm_row.values,
                                           m + static_cast<Eigen::Index>(from.index), m + static_cast<Eigen::Index>(to.index));
  return finish("flow_conservation " + dataset.comparison_label(from, to), std::max(agg, arm), tolerance, 2,
                std::max(agg_row.values.size(), arm_row.values.size()), start);
}

VerificationReport verify_model_equivalence(const NmaDataset& dataset, const ModelSpec& spec, double tolerance) {
  const auto start = Clock::now();
  const auto est = estimate_all(dataset, spec);
  const double diff = std::max({max_abs_diff(est.trial_level, est.arm_level),
                                max_abs_diff(est.trial_level, est.aggregate),
                                max_abs_diff(est.arm_level, est.aggregate)});
  return finish("model_equivalence", diff, tolerance, 3, est.trial_level.size(), start);
}

}  // namespace evflow
