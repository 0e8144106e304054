#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "evflow/core.hpp"
#include "evflow/graphs.hpp"
#include "evflow/labeled_matrix.hpp"

namespace evflow {

/// T_jk = w_jk / sum_l w_jl. Throws IsolatedNode.
LabeledMatrix transition_unipartite(const UnipartiteGraph& graph);

/// P_down = Lambda_top^-1 B, trials to treatments. Throws IsolatedNode.
LabeledMatrix transition_down(const BipartiteGraph& graph);

/// P_up = Lambda_bottom^-1 B', treatments to trials. Throws IsolatedNode.
LabeledMatrix transition_up(const BipartiteGraph& graph);

/// P = P_up P_down, treatments to treatments via one trial.
LabeledMatrix two_step(const LabeledMatrix& up, const LabeledMatrix& down);

/// Zeroes the diagonal and rescales rows to sum to one. Throws AbsorbingRow.
LabeledMatrix renormalize(const LabeledMatrix& two_step);

/// Largest |row sum - 1| or negative entry magnitude; 0 for a stochastic matrix.
double stochasticity_residual(const Eigen::MatrixXd& p);

/// A walk on a graph: transition matrix over states plus the oriented edge
/// incidence used to read off crossings.
struct WalkChain {
  LabeledMatrix transition;  // states x states
  LabeledMatrix incidence;   // edges x states, oriented
  Eigen::Index treatment_offset{0};  // state of treatment j is offset + j

  [[nodiscard]] Eigen::Index state(TreatmentId t) const { return treatment_offset + static_cast<Eigen::Index>(t.index); }
};

/// Walk on treatments with transition matrix T.
WalkChain unipartite_chain(const UnipartiteGraph& graph);

/// Higher-order walk as one chain on trials then treatments: treatment rows
/// follow P_up, trial rows follow P_down.
WalkChain bipartite_chain(const BipartiteGraph& graph);

/// Net crossings per edge, signed along the incidence orientation, so they
/// line up with a hat-matrix row.
struct Crossings {
  std::vector<std::string> edge_labels;
  Eigen::VectorXd net;
  Eigen::VectorXd standard_error;  // Monte Carlo only; zero for exact results
  std::size_t walks{0};

  [[nodiscard]] LabeledRow as_row(std::string name) const;
};

/// Exact expected net crossings of a walker started at `source` and absorbed
/// at `sink`, from the fundamental matrix of the absorbing chain. Throws
/// SingularFundamentalMatrix when the sink is unreachable.
Crossings expected_net_crossings(const WalkChain& chain, TreatmentId source, TreatmentId sink);

struct MonteCarloOptions {
  std::size_t walks{1'000'000};
  std::uint64_t seed{0};
  std::size_t step_cap{1'000'000};  // per walk
  std::size_t chunk{10'000};        // walks per RNG stream
};

/// Empirical mean net crossings with per-edge standard errors. Deterministic
/// for fixed options whatever the thread count. Throws WalkLimitExceeded.
Crossings monte_carlo_crossings(const WalkChain& chain, TreatmentId source, TreatmentId sink,
                                const MonteCarloOptions& options);

}  // namespace evflow
