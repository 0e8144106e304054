#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "evflow/conjectures.hpp"
#include "evflow/core.hpp"
#include "evflow/graphs.hpp"

namespace evflow {

struct SimConfig {
  std::size_t n_networks{1000};
  std::size_t min_treatments{3};
  std::size_t max_treatments{50};
  std::size_t min_trials{2};
  std::size_t max_trials{200};
  double min_variance_scale{0.5};
  double max_variance_scale{2.0};
  std::uint64_t seed{42};
  double tolerance{kDefaultTolerance};
};

/// Throws InvalidConfig for empty ranges, fewer than 2 treatments or no trials.
void validate(const SimConfig& config);

/// Trial-to-treatment structure under construction; each trial keeps a
/// sorted list of treatment indices.
struct BipartiteStructure {
  std::size_t treatments{0};
  std::vector<std::vector<std::size_t>> trials;

  [[nodiscard]] std::size_t edge_count() const;
  [[nodiscard]] bool has_edge(std::size_t trial, std::size_t treatment) const;
  void add_edge(std::size_t trial, std::size_t treatment);
};

/// Uniform bipartite graph with exactly `edges` distinct arms.
BipartiteStructure sample_structure(std::size_t treatments, std::size_t trials, std::size_t edges,
                                    std::mt19937_64& rng);

/// Degree-0 trials gain two distinct treatments, degree-1 trials one new one.
void repair_min_degree(BipartiteStructure& graph, std::mt19937_64& rng);

/// Connected components over trials and treatments together.
std::size_t count_components(const BipartiteStructure& graph);

/// Merges two random components per iteration until one remains; returns
/// the number of iterations.
std::size_t repair_connectivity(BipartiteStructure& graph, std::mt19937_64& rng);

struct SampledNetwork {
  NmaDataset dataset;
  std::size_t target_edges{0};  // arm count drawn before repair
  double variance_scale{0.0};
};

/// One network per the generator: sizes, edge count, repairs, then
/// half-normal arm variances and standard normal arm means.
SampledNetwork sample_network(const SimConfig& config, std::mt19937_64& rng);

/// Network `index` of a run; depends only on (config.seed, index).
SampledNetwork sample_network(const SimConfig& config, std::size_t index);

struct NetworkRecord {
  std::size_t index{0};
  BipartiteMetrics bipartite;
  UnipartiteMetrics unipartite;
  VerificationReport conjecture1;
  VerificationReport conjecture2;
};

struct SummaryStat {
  std::string metric;
  double mean{0.0};
  double sd{0.0};
  double min{0.0};
  double max{0.0};
};

struct SimulationReport {
  std::vector<NetworkRecord> networks;
  std::size_t conjecture1_passes{0};
  std::size_t conjecture2_passes{0};
  double conjecture1_max_diff{0.0};
  double conjecture2_max_diff{0.0};
  std::vector<SummaryStat> metrics;
};

SimulationReport run_simulation(const SimConfig& config);

/// One JSON object per network, one per line.
void write_records_jsonl(std::ostream& out, const SimulationReport& report);

/// Pass counts, maxima and metric summaries as one JSON document.
std::string summary_json(const SimConfig& config, const SimulationReport& report, int indent = 2);

/// metric,mean,sd,min,max rows.
void write_metrics_csv(std::ostream& out, const SimulationReport& report);

}  // namespace evflow
