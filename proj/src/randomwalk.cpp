#include "evflow/randomwalk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "evflow/error.hpp"
#include "evflow/parallel.hpp"

namespace evflow {

namespace {

using Index = Eigen::Index;

Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& weights, const std::vector<std::string>& labels) {
  const Eigen::VectorXd totals = weights.rowwise().sum();
  for (Index r = 0; r < totals.size(); ++r) {
    if (!(totals(r) > 0.0)) {
      throw Error(ErrorCode::IsolatedNode, "node " + labels[static_cast<std::size_t>(r)] + " has no edges");
    }
  }
  return totals.cwiseInverse().asDiagonal() * weights;
}

// Tail and head state of every oriented incidence row.
std::vector<std::pair<Index, Index>> edge_ends(const Eigen::MatrixXd& incidence) {
  std::vector<std::pair<Index, Index>> ends(static_cast<std::size_t>(incidence.rows()));
  for (Index e = 0; e < incidence.rows(); ++e) {
    for (Index v = 0; v < incidence.cols(); ++v) {
      if (incidence(e, v) < 0.0) ends[static_cast<std::size_t>(e)].first = v;
      if (incidence(e, v) > 0.0) ends[static_cast<std::size_t>(e)].second = v;
    }
  }
  return ends;
}

struct Step {
  Index next;
  double cumulative;
  std::size_t edge;
  int sign;  // +1 when moving along the edge orientation
};

std::vector<std::vector<Step>> step_tables(const WalkChain& chain) {
  const auto ends = edge_ends(chain.incidence.values);
  std::map<std::pair<Index, Index>, std::pair<std::size_t, int>> lookup;
  for (std::size_t e = 0; e < ends.size(); ++e) {
    lookup[{ends[e].first, ends[e].second}] = {e, 1};
    lookup[{ends[e].second, ends[e].first}] = {e, -1};
  }
  const auto& t = chain.transition.values;
  std::vector<std::vector<Step>> tables(static_cast<std::size_t>(t.rows()));
  for (Index u = 0; u < t.rows(); ++u) {
    double total = 0.0;
    auto& table = tables[static_cast<std::size_t>(u)];
    for (Index v = 0; v < t.cols(); ++v) {
      if (t(u, v) <= 0.0) continue;
      const auto it = lookup.find({u, v});
      if (it == lookup.end()) {
        throw Error(ErrorCode::DimensionMismatch, "transition " + chain.transition.row_labels[static_cast<std::size_t>(u)] +
                                                      " -> " + chain.transition.col_labels[static_cast<std::size_t>(v)] +
                                                      " has no edge");
      }
      total += t(u, v);
      table.push_back(Step{v, total, it->second.first, it->second.second});
    }
    for (auto& s : table) s.cumulative /= total;
  }
  return tables;
}

}  // namespace

LabeledMatrix transition_unipartite(const UnipartiteGraph& graph) {
  const auto a = adjacency(graph);
  return LabeledMatrix(a.row_kind, a.row_labels, a.col_kind, a.col_labels, row_normalize(a.values, a.row_labels));
}

LabeledMatrix transition_down(const BipartiteGraph& graph) {
  const auto b = biadjacency(graph);
  return LabeledMatrix(b.row_kind, b.row_labels, b.col_kind, b.col_labels, row_normalize(b.values, b.row_labels));
}

LabeledMatrix transition_up(const BipartiteGraph& graph) {
  const auto b = biadjacency(graph);
  return LabeledMatrix(b.col_kind, b.col_labels, b.row_kind, b.row_labels,
                       row_normalize(b.values.transpose(), b.col_labels));
}

LabeledMatrix two_step(const LabeledMatrix& up, const LabeledMatrix& down) {
  if (up.cols() != down.rows()) throw Error(ErrorCode::DimensionMismatch, "P_up and P_down are not conformable");
  return LabeledMatrix(up.row_kind, up.row_labels, down.col_kind, down.col_labels, up.values * down.values);
}

LabeledMatrix renormalize(const LabeledMatrix& p) {
  if (p.rows() != p.cols()) throw Error(ErrorCode::DimensionMismatch, "two-step matrix must be square");
  Eigen::MatrixXd out = p.values;
  out.diagonal().setZero();
  const Eigen::VectorXd totals = out.rowwise().sum();
  for (Index r = 0; r < totals.size(); ++r) {
    if (!(totals(r) > 0.0)) {
      throw Error(ErrorCode::AbsorbingRow, "row " + p.row_labels[static_cast<std::size_t>(r)] +
                                               " has no probability off the diagonal");
    }
  }
  return LabeledMatrix(p.row_kind, p.row_labels, p.col_kind, p.col_labels, totals.cwiseInverse().asDiagonal() * out);
}

double stochasticity_residual(const Eigen::MatrixXd& p) {
  if (p.size() == 0) return 0.0;
  const double sums = (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double negative = std::max(0.0, -p.minCoeff());
  return std::max(sums, negative);
}

WalkChain unipartite_chain(const UnipartiteGraph& graph) {
  return WalkChain{transition_unipartite(graph), incidence(graph), 0};
}

WalkChain bipartite_chain(const BipartiteGraph& graph) {
  const auto m = static_cast<Index>(graph.num_trials());
  const auto n = static_cast<Index>(graph.num_treatments());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + n, m + n);
  t.topRightCorner(m, n) = transition_down(graph).values;
  t.bottomLeftCorner(n, m) = transition_up(graph).values;
  auto labels = graph.node_labels();
  return WalkChain{LabeledMatrix(LabelKind::Node, labels, LabelKind::Node, labels, std::move(t)), incidence(graph), m};
}

LabeledRow Crossings::as_row(std::string name) const {
  return LabeledRow{std::move(name), LabelKind::Edge, edge_labels, net};
}

Crossings expected_net_crossings(const WalkChain& chain, TreatmentId source, TreatmentId sink) {
  const auto& t = chain.transition.values;
  const Index n = t.rows();
  const Index s = chain.state(source);
  const Index k = chain.state(sink);
  if (s < 0 || s >= n || k < 0 || k >= n) throw Error(ErrorCode::UnknownTreatment, "treatment index out of range");

  Crossings out;
  out.edge_labels = chain.incidence.row_labels;
  out.net = Eigen::VectorXd::Zero(chain.incidence.rows());
  out.standard_error = Eigen::VectorXd::Zero(chain.incidence.rows());
  if (s == k) return out;

  // Drop the absorbing sink; visits solve (I - Q)' v = e_source.
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(n - 1));
  for (Index v = 0; v < n; ++v) {
    if (v != k) keep.push_back(v);
  }
  const Eigen::MatrixXd q = t(keep, keep);
  const Eigen::MatrixXd fundamental = Eigen::MatrixXd::Identity(n - 1, n - 1) - q;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(fundamental.transpose());
  if (!(lu.rcond() > static_cast<double>(n) * std::numeric_limits<double>::epsilon())) {
    throw Error(ErrorCode::SingularFundamentalMatrix, "sink " + chain.transition.row_labels[static_cast<std::size_t>(k)] +
                                                          " is not reachable from every state");
  }
  Eigen::VectorXd indicator = Eigen::VectorXd::Zero(n - 1);
  indicator(s < k ? s : s - 1) = 1.0;
  const Eigen::VectorXd reduced = lu.solve(indicator);
  Eigen::VectorXd visits = Eigen::VectorXd::Zero(n);
  visits(keep) = reduced;

  const auto ends = edge_ends(chain.incidence.values);
  for (std::size_t e = 0; e < ends.size(); ++e) {
    const auto [a, b] = ends[e];
    out.net(static_cast<Index>(e)) = visits(a) * t(a, b) - visits(b) * t(b, a);
  }
  return out;
}

Crossings monte_carlo_crossings(const WalkChain& chain, TreatmentId source, TreatmentId sink,
                                const MonteCarloOptions& options) {
  if (options.walks == 0 || options.chunk == 0) {
    throw Error(ErrorCode::InvalidConfig, "Monte Carlo needs at least one walk and a positive chunk size");
  }
  const Index s = chain.state(source);
  const Index k = chain.state(sink);
  const Index n = chain.transition.rows();
  if (s < 0 || s >= n || k < 0 || k >= n) throw Error(ErrorCode::UnknownTreatment, "treatment index out of range");

  const auto edges = static_cast<Index>(chain.incidence.rows());
  Crossings out;
  out.edge_labels = chain.incidence.row_labels;
  out.walks = options.walks;
  out.net = Eigen::VectorXd::Zero(edges);
  out.standard_error = Eigen::VectorXd::Zero(edges);
  if (s == k) return out;

  const auto tables = step_tables(chain);
  const std::size_t chunks = (options.walks + options.chunk - 1) / options.chunk;
  std::vector<Eigen::VectorXd> sums(chunks);
  std::vector<Eigen::VectorXd> squares(chunks);

  parallel_for(chunks, [&](std::size_t c) {
    auto rng = make_stream(options.seed, c);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const std::size_t begin = c * options.chunk;
    const std::size_t end = std::min(options.walks, begin + options.chunk);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(edges);
    Eigen::VectorXd square = Eigen::VectorXd::Zero(edges);
    std::vector<long long> tally(static_cast<std::size_t>(edges), 0);
    std::vector<std::size_t> touched;
    for (std::size_t w = begin; w < end; ++w) {
      Index state = s;
      std::size_t steps = 0;
      while (state != k) {
        if (++steps > options.step_cap) {
          throw Error(ErrorCode::WalkLimitExceeded, "walk " + std::to_string(w) + " exceeded " +
                                                        std::to_string(options.step_cap) + " steps");
        }
        const auto& table = tables[static_cast<std::size_t>(state)];
        const double u = uniform(rng);
        auto it = std::upper_bound(table.begin(), table.end(), u,
                                   [](double x, const Step& st) { return x < st.cumulative; });
        if (it == table.end()) it = std::prev(table.end());
        if (tally[it->edge] == 0) touched.push_back(it->edge);
        tally[it->edge] += it->sign;
        state = it->next;
      }
      for (const auto e : touched) {
        const auto v = static_cast<double>(tally[e]);
        sum(static_cast<Index>(e)) += v;
        square(static_cast<Index>(e)) += v * v;
        tally[e] = 0;
      }
      touched.clear();
    }
    sums[c] = std::move(sum);
    squares[c] = std::move(square);
  });

  Eigen::VectorXd total = Eigen::VectorXd::Zero(edges);
  Eigen::VectorXd total_sq = Eigen::VectorXd::Zero(edges);
  for (std::size_t c = 0; c < chunks; ++c) {
    total += sums[c];
    total_sq += squares[c];
  }
  const auto walks = static_cast<double>(options.walks);
  out.net = total / walks;
  if (options.walks > 1) {
    const Eigen::ArrayXd variance =
        ((total_sq.array() - walks * out.net.array().square()) / (walks - 1.0)).max(0.0);
    out.standard_error = (variance / walks).sqrt().matrix();
  }
  return out;
}

}  // namespace evflow
