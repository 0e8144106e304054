#include "evflow/electrical.hpp"

#include "evflow/error.hpp"
#include "evflow/linalg.hpp"

namespace evflow {

using Index = Eigen::Index;

LabeledMatrix ResistanceMatrix::dense() const {
  return LabeledMatrix(LabelKind::Arm, arm_labels, LabelKind::Arm, arm_labels, diagonal.asDiagonal().toDenseMatrix());
}

ResistanceMatrix resistance_matrix(const NmaDataset& dataset, const ModelSpec& spec) {
  return ResistanceMatrix{dataset.arm_labels(), arm_resistances(dataset, spec)};
}

Eigen::MatrixXd nodal_current_matrix(Index treatments, Index trials, Index baseline) {
  if (treatments < 2 || baseline < 0 || baseline >= treatments) {
    throw Error(ErrorCode::DimensionMismatch, "nodal currents need two treatments and a valid baseline");
  }
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(treatments - 1, trials + treatments);
  for (Index t = 0, r = 0; t < treatments; ++t) {
    if (t == baseline) continue;
    j(r, trials + baseline) = -1.0;
    j(r, trials + t) = 1.0;
    ++r;
  }
  return j;
}

LabeledMatrix nodal_current_matrix(const BipartiteGraph& graph, TreatmentId baseline) {
  const auto n = static_cast<Index>(graph.num_treatments());
  const auto b = static_cast<Index>(baseline.index);
  std::vector<std::string> rows;
  for (Index t = 0; t < n; ++t) {
    if (t != b) rows.push_back(pair_label(graph.treatments()[baseline.index], graph.treatments()[static_cast<std::size_t>(t)]));
  }
  return LabeledMatrix(LabelKind::Comparison, std::move(rows), LabelKind::Node, graph.node_labels(),
                       nodal_current_matrix(n, static_cast<Index>(graph.num_trials()), b));
}

LabeledMatrix edge_currents(const LabeledMatrix& incidence, const ResistanceMatrix& resistances,
                            const LabeledMatrix& nodal_currents, LaplacianInverse method) {
  const Index edges = incidence.rows();
  const Index nodes = incidence.cols();
  if (resistances.diagonal.size() != edges || nodal_currents.cols() != nodes) {
    throw Error(ErrorCode::DimensionMismatch, "incidence, resistances and nodal currents are not conformable");
  }

  // Incidence rows are sparse; keep (node, sign) pairs instead of dense products.
  std::vector<std::vector<std::pair<Index, double>>> entries(static_cast<std::size_t>(edges));
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(nodes, nodes);
  for (Index e = 0; e < edges; ++e) {
    auto& row = entries[static_cast<std::size_t>(e)];
    for (Index v = 0; v < nodes; ++v) {
      if (incidence.values(e, v) != 0.0) row.emplace_back(v, incidence.values(e, v));
    }
    const double conductance = 1.0 / resistances.diagonal(e);
    for (const auto& [a, ba] : row) {
      for (const auto& [b, bb] : row) lap(a, b) += ba * conductance * bb;
    }
  }

  Eigen::MatrixXd lap_pinv;
  if (method == LaplacianInverse::Eigen) {
    lap_pinv = linalg::pseudo_inverse_symmetric(lap, 1);
  } else {
    if (linalg::numerical_rank(lap) != nodes - 1) {
      throw Error(ErrorCode::RankDeficient, "bipartite Laplacian does not have rank nodes - 1");
    }
    lap_pinv = linalg::laplacian_pinv_shifted(lap);
  }

  const Eigen::MatrixXd potentials = nodal_currents.values * lap_pinv;
  Eigen::MatrixXd currents = Eigen::MatrixXd::Zero(nodal_currents.rows(), edges);
  for (Index e = 0; e < edges; ++e) {
    const double conductance = 1.0 / resistances.diagonal(e);
    for (const auto& [v, sign] : entries[static_cast<std::size_t>(e)]) {
      currents.col(e) += (sign * conductance) * potentials.col(v);
    }
  }
  return LabeledMatrix(nodal_currents.row_kind, nodal_currents.row_labels, incidence.row_kind, incidence.row_labels,
                       std::move(currents));
}

}  // namespace evflow
