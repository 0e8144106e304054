#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "evflow/core.hpp"
#include "evflow/hat.hpp"
#include "evflow/labeled_matrix.hpp"

namespace evflow {

struct BipartiteEdge {
  std::size_t trial{0};
  std::size_t treatment{0};
  double weight{1.0};
};

/// Trials (top) joined to the treatments (bottom) they include. Edges are
/// kept in arm order: trial-major, treatment ascending.
class BipartiteGraph {
 public:
  /// Throws DimensionMismatch on out-of-range or repeated edges and
  /// NonpositiveVariance on non-positive weights.
  BipartiteGraph(std::vector<std::string> trials, std::vector<std::string> treatments,
                 std::vector<BipartiteEdge> edges);

  [[nodiscard]] const std::vector<std::string>& trials() const noexcept { return trials_; }
  [[nodiscard]] const std::vector<std::string>& treatments() const noexcept { return treatments_; }
  [[nodiscard]] const std::vector<BipartiteEdge>& edges() const noexcept { return edges_; }
  [[nodiscard]] std::size_t num_trials() const noexcept { return trials_.size(); }
  [[nodiscard]] std::size_t num_treatments() const noexcept { return treatments_.size(); }

  /// Lambda_top and Lambda_bottom: weighted degrees of trials and treatments.
  [[nodiscard]] Eigen::VectorXd trial_strengths() const;
  [[nodiscard]] Eigen::VectorXd treatment_strengths() const;

  /// Trials first, then treatments.
  [[nodiscard]] std::vector<std::string> node_labels() const;
  [[nodiscard]] std::vector<std::string> edge_labels() const;

 private:
  std::vector<std::string> trials_;
  std::vector<std::string> treatments_;
  std::vector<BipartiteEdge> edges_;
};

struct UnipartiteEdge {
  std::size_t first{0};  // first < second
  std::size_t second{0};
  double weight{1.0};
};

/// Simple weighted graph on treatments, edges sorted by (first, second).
class UnipartiteGraph {
 public:
  /// Orients every edge from the lower to the higher index and sorts them.
  /// Throws DimensionMismatch on self-loops, parallel or out-of-range edges
  /// and NonpositiveVariance on non-positive weights.
  UnipartiteGraph(std::vector<std::string> nodes, std::vector<UnipartiteEdge> edges);

  [[nodiscard]] const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<UnipartiteEdge>& edges() const noexcept { return edges_; }
  [[nodiscard]] std::size_t num_nodes() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::vector<std::string> edge_labels() const;

 private:
  std::vector<std::string> nodes_;
  std::vector<UnipartiteEdge> edges_;
};

/// One edge per arm weighted by 1 / (sigma^2 + tau^2/2).
BipartiteGraph bipartite_from_dataset(const NmaDataset& dataset, const ModelSpec& spec);

/// M x N weighted biadjacency B.
LabeledMatrix biadjacency(const BipartiteGraph& graph);

/// (M+N) x (M+N) adjacency [[0, B], [B', 0]].
LabeledMatrix adjacency(const BipartiteGraph& graph);
LabeledMatrix adjacency(const UnipartiteGraph& graph);

/// Edge-node incidence. Oriented rows carry -1 at the trial and +1 at the
/// treatment; unoriented rows carry 1 at both.
LabeledMatrix incidence(const BipartiteGraph& graph, bool oriented = true);

/// Oriented rows carry -1 at the lower-ordered node and +1 at the other.
LabeledMatrix incidence(const UnipartiteGraph& graph, bool oriented = true);

/// Clique projection weighted by the pooled direct-evidence weights. Throws
/// DimensionMismatch if the evidence edges differ from the projected ones.
UnipartiteGraph unipartite_projection(const BipartiteGraph& graph, const DirectEvidence& evidence);

/// Clique projection where each edge weight counts the trials sharing it.
UnipartiteGraph unipartite_projection(const BipartiteGraph& graph);

struct Flow {
  std::string edge;
  std::string from;
  std::string to;
  double magnitude{0.0};
};

/// Directed reading of one hat-matrix row.
struct FlowNetwork {
  std::string source;
  std::string sink;
  std::vector<std::string> top_nodes;     // trials; empty for unipartite flows
  std::vector<std::string> bottom_nodes;  // treatments
  std::vector<Flow> flows;                // one per edge, in edge order
  double conservation_residual{0.0};
};

/// Largest deviation of B'h from the unit source/sink injection: the net
/// outflow must be 1 at `source`, the net inflow 1 at `sink` and the balance
/// 0 elsewhere. With source == sink every node must balance.
double conservation_residual(const Eigen::MatrixXd& oriented_incidence, const Eigen::VectorXd& row,
                             Eigen::Index source, Eigen::Index sink);

/// Tolerance applied by flow_network before raising ConservationViolation.
inline constexpr double kConservationTolerance = 1e-10;

/// Turns an aggregate hat row into flows on the unipartite graph.
FlowNetwork flow_network(const LabeledRow& hat_row, const UnipartiteGraph& graph, TreatmentId from,
                         TreatmentId to);

/// Turns an arm-level hat row into flows on the bipartite graph.
FlowNetwork flow_network(const LabeledRow& hat_row, const BipartiteGraph& graph, TreatmentId from,
                         TreatmentId to);

struct DegreeStats {
  double mean{0.0};
  double min{0.0};
  double max{0.0};
};

/// Structural metrics on the unweighted graph.
struct UnipartiteMetrics {
  std::size_t nodes{0};
  std::size_t edges{0};
  DegreeStats degree;
  double density{0.0};  // edges / (n choose 2)
  std::size_t radius{0};
  double mean_distance{0.0};
};

struct BipartiteMetrics {
  std::size_t trials{0};
  std::size_t treatments{0};
  std::size_t edges{0};
  DegreeStats trial_degree;
  DegreeStats treatment_degree;
  double density{0.0};  // edges / (trials * treatments)
  std::size_t radius{0};
  double mean_distance{0.0};
};

UnipartiteMetrics graph_metrics(const UnipartiteGraph& graph);
BipartiteMetrics graph_metrics(const BipartiteGraph& graph);

/// Graphviz export of a bipartite graph, trials and treatments in separate
/// rank=same groups.
void write_dot(std::ostream& out, const BipartiteGraph& graph);

/// Graphviz export of a flow network; magnitudes below 1e-12 print as 0.
void write_dot(std::ostream& out, const FlowNetwork& flows);

/// JSON text mirroring the FlowNetwork fields.
std::string to_json(const FlowNetwork& flows, int indent = 2);

}  // namespace evflow
