#include "evflow/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "evflow/error.hpp"
#include "evflow/linalg.hpp"

namespace evflow {

namespace {

using Index = Eigen::Index;
using AdjacencyList = std::vector<std::vector<std::size_t>>;

void require_positive(double weight, const std::string& edge) {
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw Error(ErrorCode::NonpositiveVariance, "edge " + edge + " has non-positive weight");
  }
}

DegreeStats degree_stats(const AdjacencyList& adj, std::size_t begin, std::size_t end) {
  DegreeStats s;
  if (begin >= end) return s;
  s.min = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t v = begin; v < end; ++v) {
    const auto d = static_cast<double>(adj[v].size());
    total += d;
    s.min = std::min(s.min, d);
    s.max = std::max(s.max, d);
  }
  s.mean = total / static_cast<double>(end - begin);
  return s;
}

// Radius and mean pairwise distance by breadth-first search from every node.
std::pair<std::size_t, double> distance_summary(const AdjacencyList& adj) {
  const std::size_t n = adj.size();
  if (n < 2) return {0, 0.0};
  constexpr auto unseen = std::numeric_limits<std::size_t>::max();
  std::size_t radius = unseen;
  double total = 0.0;
  std::vector<std::size_t> dist(n);
  std::queue<std::size_t> frontier;
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), unseen);
    dist[s] = 0;
    frontier.push(s);
    std::size_t eccentricity = 0;
    std::size_t reached = 1;
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      for (const auto v : adj[u]) {
        if (dist[v] != unseen) continue;
        dist[v] = dist[u] + 1;
        eccentricity = std::max(eccentricity, dist[v]);
        total += static_cast<double>(dist[v]);
        ++reached;
        frontier.push(v);
      }
    }
    if (reached != n) throw Error(ErrorCode::DisconnectedNetwork, "graph metrics need a connected graph");
    radius = std::min(radius, eccentricity);
  }
  return {radius, total / static_cast<double>(n * (n - 1))};
}

FlowNetwork build_flows(const LabeledRow& row, const LabeledMatrix& oriented, const std::vector<std::string>& nodes,
                        Index source, Index sink) {
  if (row.labels != oriented.row_labels) {
    throw Error(ErrorCode::ConservationViolation, "hat row " + row.name + " does not belong to this graph");
  }
  FlowNetwork out;
  out.source = nodes[static_cast<std::size_t>(source)];
  out.sink = nodes[static_cast<std::size_t>(sink)];
  out.conservation_residual = conservation_residual(oriented.values, row.values, source, sink);
  if (!(out.conservation_residual <= kConservationTolerance)) {
    std::ostringstream msg;
    msg << "hat row " << row.name << " violates flow conservation by " << out.conservation_residual;
    throw Error(ErrorCode::ConservationViolation, msg.str());
  }
  out.flows.reserve(row.labels.size());
  for (Index e = 0; e < oriented.rows(); ++e) {
    Index tail = 0;
    Index head = 0;
    for (Index v = 0; v < oriented.cols(); ++v) {
      if (oriented.values(e, v) < 0.0) tail = v;
      if (oriented.values(e, v) > 0.0) head = v;
    }
    const double h = row.values(e);
    if (h < 0.0) std::swap(tail, head);
    out.flows.push_back(Flow{row.labels[static_cast<std::size_t>(e)], nodes[static_cast<std::size_t>(tail)],
                             nodes[static_cast<std::size_t>(head)], std::abs(h)});
  }
  return out;
}

std::string quoted(const std::string& id) {
  std::string out = "\"";
  for (const char c : id) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

double displayed(double magnitude) { return magnitude < 1e-12 ? 0.0 : magnitude; }

}  // namespace

BipartiteGraph::BipartiteGraph(std::vector<std::string> trials, std::vector<std::string> treatments,
                               std::vector<BipartiteEdge> edges)
    : trials_(std::move(trials)), treatments_(std::move(treatments)), edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end(), [](const BipartiteEdge& a, const BipartiteEdge& b) {
    return std::tie(a.trial, a.treatment) < std::tie(b.trial, b.treatment);
  });
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto& edge = edges_[e];
    if (edge.trial >= trials_.size() || edge.treatment >= treatments_.size()) {
      throw Error(ErrorCode::DimensionMismatch, "bipartite edge refers to an unknown node");
    }
    if (e > 0 && edge.trial == edges_[e - 1].trial && edge.treatment == edges_[e - 1].treatment) {
      throw Error(ErrorCode::DimensionMismatch, "repeated bipartite edge");
    }
    require_positive(edge.weight, pair_label(trials_[edge.trial], treatments_[edge.treatment]));
  }
}

Eigen::VectorXd BipartiteGraph::trial_strengths() const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Index>(trials_.size()));
  for (const auto& e : edges_) s(static_cast<Index>(e.trial)) += e.weight;
  return s;
}

Eigen::VectorXd BipartiteGraph::treatment_strengths() const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Index>(treatments_.size()));
  for (const auto& e : edges_) s(static_cast<Index>(e.treatment)) += e.weight;
  return s;
}

std::vector<std::string> BipartiteGraph::node_labels() const {
  std::vector<std::string> out = trials_;
  out.insert(out.end(), treatments_.begin(), treatments_.end());
  return out;
}

std::vector<std::string> BipartiteGraph::edge_labels() const {
  std::vector<std::string> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) out.push_back(pair_label(trials_[e.trial], treatments_[e.treatment]));
  return out;
}

UnipartiteGraph::UnipartiteGraph(std::vector<std::string> nodes, std::vector<UnipartiteEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (auto& e : edges_) {
    if (e.first > e.second) std::swap(e.first, e.second);
    if (e.first == e.second || e.second >= nodes_.size()) {
      throw Error(ErrorCode::DimensionMismatch, "unipartite edge is a self-loop or refers to an unknown node");
    }
    require_positive(e.weight, pair_label(nodes_[e.first], nodes_[e.second]));
  }
  std::sort(edges_.begin(), edges_.end(), [](const UnipartiteEdge& a, const UnipartiteEdge& b) {
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
  for (std::size_t e = 1; e < edges_.size(); ++e) {
    if (edges_[e].first == edges_[e - 1].first && edges_[e].second == edges_[e - 1].second) {
      throw Error(ErrorCode::DimensionMismatch, "parallel unipartite edges");
    }
  }
}

std::vector<std::string> UnipartiteGraph::edge_labels() const {
  std::vector<std::string> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) out.push_back(pair_label(nodes_[e.first], nodes_[e.second]));
  return out;
}

BipartiteGraph bipartite_from_dataset(const NmaDataset& dataset, const ModelSpec& spec) {
  const Eigen::VectorXd r = arm_resistances(dataset, spec);
  std::vector<BipartiteEdge> edges;
  edges.reserve(dataset.num_arms());
  for (std::size_t a = 0; a < dataset.num_arms(); ++a) {
    const auto& arm = dataset.arms()[a];
    edges.push_back(BipartiteEdge{arm.trial.index, arm.treatment.index, 1.0 / r(static_cast<Index>(a))});
  }
  return BipartiteGraph(dataset.trial_labels(), dataset.treatment_labels(), std::move(edges));
}

LabeledMatrix biadjacency(const BipartiteGraph& graph) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Index>(graph.num_trials()),
                                            static_cast<Index>(graph.num_treatments()));
  for (const auto& e : graph.edges()) b(static_cast<Index>(e.trial), static_cast<Index>(e.treatment)) = e.weight;
  return LabeledMatrix(LabelKind::Trial, graph.trials(), LabelKind::Treatment, graph.treatments(), std::move(b));
}

LabeledMatrix adjacency(const BipartiteGraph& graph) {
  const auto m = static_cast<Index>(graph.num_trials());
  const auto n = static_cast<Index>(graph.num_treatments());
  const Eigen::MatrixXd b = biadjacency(graph).values;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m + n, m + n);
  a.topRightCorner(m, n) = b;
  a.bottomLeftCorner(n, m) = b.transpose();
  auto labels = graph.node_labels();
  return LabeledMatrix(LabelKind::Node, labels, LabelKind::Node, labels, std::move(a));
}

LabeledMatrix adjacency(const UnipartiteGraph& graph) {
  const auto n = static_cast<Index>(graph.num_nodes());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : graph.edges()) {
    a(static_cast<Index>(e.first), static_cast<Index>(e.second)) = e.weight;
    a(static_cast<Index>(e.second), static_cast<Index>(e.first)) = e.weight;
  }
  return LabeledMatrix(LabelKind::Treatment, graph.nodes(), LabelKind::Treatment, graph.nodes(), std::move(a));
}

LabeledMatrix incidence(const BipartiteGraph& graph, bool oriented) {
  const auto m = graph.num_trials();
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(graph.edges().size());
  for (const auto& e : graph.edges()) {
    pairs.emplace_back(static_cast<Index>(e.trial), static_cast<Index>(m + e.treatment));
  }
  Eigen::MatrixXd b = linalg::oriented_incidence(static_cast<Index>(m + graph.num_treatments()), pairs);
  if (!oriented) b = b.cwiseAbs();
  return LabeledMatrix(LabelKind::Arm, graph.edge_labels(), LabelKind::Node, graph.node_labels(), std::move(b));
}

LabeledMatrix incidence(const UnipartiteGraph& graph, bool oriented) {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(graph.edges().size());
  for (const auto& e : graph.edges()) pairs.emplace_back(static_cast<Index>(e.first), static_cast<Index>(e.second));
  Eigen::MatrixXd b = linalg::oriented_incidence(static_cast<Index>(graph.num_nodes()), pairs);
  if (!oriented) b = b.cwiseAbs();
  return LabeledMatrix(LabelKind::Edge, graph.edge_labels(), LabelKind::Treatment, graph.nodes(), std::move(b));
}

UnipartiteGraph unipartite_projection(const BipartiteGraph& graph) {
  std::map<std::pair<std::size_t, std::size_t>, double> counts;
  const auto& edges = graph.edges();
  for (std::size_t a = 0; a < edges.size(); ++a) {
    for (std::size_t b = a + 1; b < edges.size() && edges[b].trial == edges[a].trial; ++b) {
      counts[{edges[a].treatment, edges[b].treatment}] += 1.0;
    }
  }
  std::vector<UnipartiteEdge> out;
  out.reserve(counts.size());
  for (const auto& [pair, count] : counts) out.push_back(UnipartiteEdge{pair.first, pair.second, count});
  return UnipartiteGraph(graph.treatments(), std::move(out));
}

UnipartiteGraph unipartite_projection(const BipartiteGraph& graph, const DirectEvidence& evidence) {
  const auto structure = unipartite_projection(graph);
  if (structure.edges().size() != evidence.size()) {
    throw Error(ErrorCode::DimensionMismatch, "direct evidence does not match the projected edge set");
  }
  std::vector<UnipartiteEdge> edges;
  edges.reserve(evidence.size());
  for (std::size_t e = 0; e < evidence.size(); ++e) {
    const auto& s = structure.edges()[e];
    if (s.first != evidence.edges[e].first.index || s.second != evidence.edges[e].second.index) {
      throw Error(ErrorCode::DimensionMismatch, "direct evidence does not match the projected edge set");
    }
    edges.push_back(UnipartiteEdge{s.first, s.second, evidence.weights(static_cast<Index>(e))});
  }
  return UnipartiteGraph(graph.treatments(), std::move(edges));
}

double conservation_residual(const Eigen::MatrixXd& oriented_incidence, const Eigen::VectorXd& row, Index source,
                             Index sink) {
  if (oriented_incidence.rows() != row.size()) {
    throw Error(ErrorCode::DimensionMismatch, "hat row length does not match the edge count");
  }
  // (B'h)_v is inflow minus outflow at node v.
  Eigen::VectorXd balance = oriented_incidence.transpose() * row;
  if (source != sink) {
    balance(source) += 1.0;
    balance(sink) -= 1.0;
  }
  return balance.size() == 0 ? 0.0 : balance.cwiseAbs().maxCoeff();
}

FlowNetwork flow_network(const LabeledRow& hat_row, const UnipartiteGraph& graph, TreatmentId from, TreatmentId to) {
  if (from.index >= graph.num_nodes() || to.index >= graph.num_nodes()) {
    throw Error(ErrorCode::UnknownTreatment, "treatment index out of range");
  }
  auto out = build_flows(hat_row, incidence(graph), graph.nodes(), static_cast<Index>(from.index),
                         static_cast<Index>(to.index));
  out.bottom_nodes = graph.nodes();
  return out;
}

FlowNetwork flow_network(const LabeledRow& hat_row, const BipartiteGraph& graph, TreatmentId from, TreatmentId to) {
  if (from.index >= graph.num_treatments() || to.index >= graph.num_treatments()) {
    throw Error(ErrorCode::UnknownTreatment, "treatment index out of range");
  }
  const auto m = static_cast<Index>(graph.num_trials());
  auto out = build_flows(hat_row, incidence(graph), graph.node_labels(), m + static_cast<Index>(from.index),
                         m + static_cast<Index>(to.index));
  out.top_nodes = graph.trials();
  out.bottom_nodes = graph.treatments();
  return out;
}

UnipartiteMetrics graph_metrics(const UnipartiteGraph& graph) {
  AdjacencyList adj(graph.num_nodes());
  for (const auto& e : graph.edges()) {
    adj[e.first].push_back(e.second);
    adj[e.second].push_back(e.first);
  }
  UnipartiteMetrics m;
  m.nodes = graph.num_nodes();
  m.edges = graph.edges().size();
  m.degree = degree_stats(adj, 0, adj.size());
  const double possible = static_cast<double>(m.nodes) * static_cast<double>(m.nodes - 1) / 2.0;
  m.density = possible > 0.0 ? static_cast<double>(m.edges) / possible : 0.0;
  std::tie(m.radius, m.mean_distance) = distance_summary(adj);
  return m;
}

BipartiteMetrics graph_metrics(const BipartiteGraph& graph) {
  const auto m_trials = graph.num_trials();
  AdjacencyList adj(m_trials + graph.num_treatments());
  for (const auto& e : graph.edges()) {
    adj[e.trial].push_back(m_trials + e.treatment);
    adj[m_trials + e.treatment].push_back(e.trial);
  }
  BipartiteMetrics m;
  m.trials = m_trials;
  m.treatments = graph.num_treatments();
  m.edges = graph.edges().size();
  m.trial_degree = degree_stats(adj, 0, m_trials);
  m.treatment_degree = degree_stats(adj, m_trials, adj.size());
  const double possible = static_cast<double>(m.trials) * static_cast<double>(m.treatments);
  m.density = possible > 0.0 ? static_cast<double>(m.edges) / possible : 0.0;
  std::tie(m.radius, m.mean_distance) = distance_summary(adj);
  return m;
}

void write_dot(std::ostream& out, const BipartiteGraph& graph) {
  out << "graph bipartite {\n";
  out << "  { rank=same; node [shape=box];";
  for (const auto& t : graph.trials()) out << ' ' << quoted(t) << ';';
  out << " }\n";
  out << "  { rank=same; node [shape=ellipse];";
  for (const auto& t : graph.treatments()) out << ' ' << quoted(t) << ';';
  out << " }\n";
  for (const auto& e : graph.edges()) {
    out << "  " << quoted(graph.trials()[e.trial]) << " -- " << quoted(graph.treatments()[e.treatment])
        << " [weight=" << std::setprecision(6) << e.weight << "];\n";
  }
  out << "}\n";
}

void write_dot(std::ostream& out, const FlowNetwork& flows) {
  double largest = 0.0;
  for (const auto& f : flows.flows) largest = std::max(largest, displayed(f.magnitude));
  out << "digraph flow {\n";
  if (!flows.top_nodes.empty()) {
    out << "  { rank=same; node [shape=box];";
    for (const auto& t : flows.top_nodes) out << ' ' << quoted(t) << ';';
    out << " }\n";
  }
  out << "  { rank=same; node [shape=ellipse];";
  for (const auto& t : flows.bottom_nodes) out << ' ' << quoted(t) << ';';
  out << " }\n";
  out << "  " << quoted(flows.source) << " [style=filled, fillcolor=lightblue];\n";
  out << "  " << quoted(flows.sink) << " [style=filled, fillcolor=salmon];\n";
  for (const auto& f : flows.flows) {
    const double m = displayed(f.magnitude);
    const double width = largest > 0.0 ? 5.0 * m / largest : 0.0;
    out << "  " << quoted(f.from) << " -> " << quoted(f.to) << " [label=\"" << std::setprecision(4) << m
        << "\", penwidth=" << std::setprecision(4) << width << (m == 0.0 ? ", style=dotted" : "") << "];\n";
  }
  out << "}\n";
}

std::string to_json(const FlowNetwork& flows, int indent) {
  nlohmann::ordered_json j;
  j["source"] = flows.source;
  j["sink"] = flows.sink;
  j["top_nodes"] = flows.top_nodes;
  j["bottom_nodes"] = flows.bottom_nodes;
  j["conservation_residual"] = flows.conservation_residual;
  auto& list = j["flows"] = nlohmann::ordered_json::array();
  for (const auto& f : flows.flows) {
    list.push_back({{"edge", f.edge}, {"from", f.from}, {"to", f.to}, {"magnitude", displayed(f.magnitude)}});
  }
  return j.dump(indent);
}

}  // namespace evflow
