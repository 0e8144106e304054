#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "evflow/core.hpp"
#include "evflow/graphs.hpp"
#include "evflow/labeled_matrix.hpp"

namespace evflow {

/// Diagonal arm resistances sigma^2 + tau^2/2 in arm order.
struct ResistanceMatrix {
  std::vector<std::string> arm_labels;
  Eigen::VectorXd diagonal;

  [[nodiscard]] LabeledMatrix dense() const;
};

ResistanceMatrix resistance_matrix(const NmaDataset& dataset, const ModelSpec& spec);

/// J' = [0 | C_N]: one battery row per basic comparison, nothing injected at
/// the trial nodes. Columns are trials then treatments.
Eigen::MatrixXd nodal_current_matrix(Eigen::Index treatments, Eigen::Index trials, Eigen::Index baseline = 0);
LabeledMatrix nodal_current_matrix(const BipartiteGraph& graph, TreatmentId baseline);

/// How the bipartite Laplacian is pseudo-inverted.
enum class LaplacianInverse {
  Eigen,    // symmetric eigendecomposition with the shared cutoff
  Shifted,  // (L + 11'/n)^-1 - 11'/n
};

/// I' = J' (B' R^-1 B)^+ B' R^-1 for an oriented incidence B (edges x
/// nodes). Throws RankDeficient unless the Laplacian has nullity one.
LabeledMatrix edge_currents(const LabeledMatrix& incidence, const ResistanceMatrix& resistances,
                            const LabeledMatrix& nodal_currents, LaplacianInverse method = LaplacianInverse::Eigen);

}  // namespace evflow
