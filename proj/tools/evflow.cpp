// evflow: command-line front end for hat matrices, evidence flows,
// verification reports and simulation batches.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "evflow/conjectures.hpp"
#include "evflow/electrical.hpp"
#include "evflow/error.hpp"
#include "evflow/graphs.hpp"
#include "evflow/hat.hpp"
#include "evflow/randomwalk.hpp"
#include "evflow/simgen.hpp"

using namespace evflow;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitVerificationFailed = 1;
constexpr int kExitInvalidInput = 2;

struct ModelFlags {
  std::string input;
  std::optional<std::string> baseline;
  double tau{0.0};
  bool continuity{false};
  std::string output;

  [[nodiscard]] NmaDataset load() const {
    IngestOptions opts;
    opts.baseline = baseline;
    opts.continuity_correction = continuity;
    return load_arm_csv(input, opts);
  }
  [[nodiscard]] ModelSpec spec() const { return tau > 0.0 ? ModelSpec::random(tau) : ModelSpec::common(); }
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
  cmd->add_option("input", flags.input, "Arm-level CSV (study,treatment,mean,variance or events,total)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--baseline", flags.baseline, "Reference treatment (default: first label)");
  cmd->add_option("--tau", flags.tau, "Heterogeneity SD; 0 gives the common-effect model")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--continuity", flags.continuity, "Add 0.5 to every cell of trials with zero or full events");
  cmd->add_option("--output,-o", flags.output, "Write to this file instead of stdout");
}

// Output sink that is either a file or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw Error(ErrorCode::Parse, "cannot open " + path + " for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

json matrix_json(const std::string& name, const LabeledMatrix& m) {
  json values = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m.values(r, c));
    values.push_back(std::move(row));
  }
  return json{{"name", name},
              {"row_kind", to_string(m.row_kind)},
              {"col_kind", to_string(m.col_kind)},
              {"rows", m.row_labels},
              {"cols", m.col_labels},
              {"values", std::move(values)}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

void write_matrix_csv(std::ostream& out, const std::string& name, const LabeledMatrix& m) {
  out << csv_field(name);
  for (const auto& c : m.col_labels) out << ',' << csv_field(c);
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << csv_field(m.row_labels[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << m.values(r, c);
    out << '\n';
  }
}

// Three decimals, the usual display precision for published matrices.
void write_matrix_pretty(std::ostream& out, const std::string& name, const LabeledMatrix& m) {
  std::size_t label_width = name.size();
  for (const auto& r : m.row_labels) label_width = std::max(label_width, r.size());
  std::size_t cell = 7;
  for (const auto& c : m.col_labels) cell = std::max(cell, c.size());
  out << std::left << std::setw(static_cast<int>(label_width)) << name;
  for (const auto& c : m.col_labels) out << "  " << std::right << std::setw(static_cast<int>(cell)) << c;
  out << '\n' << std::fixed << std::setprecision(3);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << std::left << std::setw(static_cast<int>(label_width)) << m.row_labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      // Avoid printing -0.000 for tiny negative values.
      const double v = std::abs(m.values(r, c)) < 5e-4 ? 0.0 : m.values(r, c);
      out << "  " << std::right << std::setw(static_cast<int>(cell)) << v;
    }
    out << '\n';
  }
  out << std::defaultfloat;
}

LabeledMatrix diagonal_matrix(LabelKind kind, const std::vector<std::string>& labels, const Eigen::VectorXd& d) {
  return LabeledMatrix(kind, labels, kind, labels, d.asDiagonal().toDenseMatrix());
}

// Every matrix the tool can emit, built lazily from one dataset.
std::map<std::string, std::function<LabeledMatrix()>> matrix_table(const NmaDataset& ds, const ModelSpec& spec) {
  auto g = std::make_shared<BipartiteGraph>(bipartite_from_dataset(ds, spec));
  auto ev = std::make_shared<DirectEvidence>(direct_evidence(ds, spec));
  auto uni = std::make_shared<UnipartiteGraph>(unipartite_projection(*g, *ev));
  auto hats = std::make_shared<std::optional<HatMatrices>>();
  auto hat = [&ds, spec, hats]() -> const HatMatrices& {
    if (!*hats) *hats = compute_hat_matrices(ds, spec);
    return **hats;
  };
  auto currents = [&ds, spec, g] {
    return edge_currents(incidence(*g, true), resistance_matrix(ds, spec), nodal_current_matrix(*g, ds.baseline()));
  };
  return {
      {"C", [&ds] { return build_contrast_map(ds); }},
      {"X", [&ds] { return build_design_matrix(ds); }},
      {"Sigma", [&ds, spec] { return build_covariance(ds, spec).covariance; }},
      {"W", [&ds, spec] { return build_covariance(ds, spec).weights; }},
      {"H", [hat] { return hat().trial_level; }},
      {"Harm", [hat] { return hat().arm_level; }},
      {"Hagg", [hat] { return hat().aggregate; }},
      {"Wagg", [ev] { return diagonal_matrix(LabelKind::Edge, ev->edge_labels, ev->weights); }},
      {"B", [g] { return biadjacency(*g); }},
      {"Buni", [uni] { return incidence(*uni, true); }},
      {"Bbi", [g] { return incidence(*g, true); }},
      {"A", [g] { return adjacency(*g); }},
      {"Auni", [uni] { return adjacency(*uni); }},
      {"R", [&ds, spec] { return resistance_matrix(ds, spec).dense(); }},
      {"J", [&ds, g] { return nodal_current_matrix(*g, ds.baseline()); }},
      {"I", currents},
      {"T", [uni] { return transition_unipartite(*uni); }},
      {"Pup", [g] { return transition_up(*g); }},
      {"Pdown", [g] { return transition_down(*g); }},
      {"P", [g] { return two_step(transition_up(*g), transition_down(*g)); }},
      {"Ptilde", [g] { return renormalize(two_step(transition_up(*g), transition_down(*g))); }},
  };
}

const std::vector<std::string> kMatrixOrder = {"C",    "X",  "Sigma", "W", "H",    "Harm", "Hagg",
                                               "Wagg", "B",  "Buni",  "Bbi", "A",  "Auni", "R",
                                               "J",    "I",  "T",     "Pup", "Pdown", "P", "Ptilde"};

int cmd_matrices(const ModelFlags& flags, std::vector<std::string> which, const std::string& format) {
  const auto ds = flags.load();
  auto table = matrix_table(ds, flags.spec());
  if (which.empty() || (which.size() == 1 && which.front() == "all")) which = kMatrixOrder;
  for (const auto& w : which) {
    if (!table.count(w)) throw Error(ErrorCode::InvalidConfig, "unknown matrix '" + w + "'");
  }
  Sink sink(flags.output);
  auto& out = sink.stream();
  json all = json::array();
  for (std::size_t i = 0; i < which.size(); ++i) {
    const auto m = table.at(which[i])();
    if (format == "json") {
      all.push_back(matrix_json(which[i], m));
    } else if (format == "csv") {
      if (i > 0) out << '\n';
      write_matrix_csv(out, which[i], m);
    } else {
      if (i > 0) out << '\n';
      write_matrix_pretty(out, which[i], m);
    }
  }
  if (format == "json") out << (which.size() == 1 ? all.front() : all).dump(2) << '\n';
  return 0;
}

int cmd_flow(const ModelFlags& flags, const std::string& from_label, const std::string& to_label,
             const std::string& graph_kind, const std::string& format) {
  const auto ds = flags.load();
  const auto spec = flags.spec();
  const auto from = ds.treatment(from_label);
  const auto to = ds.treatment(to_label);
  const auto g = bipartite_from_dataset(ds, spec);
  const auto hats = compute_hat_matrices(ds, spec);
  const auto flows =
      graph_kind == "bi"
          ? flow_network(expand_consistency(hats.arm_level, ds, from, to), g, from, to)
          : flow_network(expand_consistency(hats.aggregate, ds, from, to),
                         unipartite_projection(g, direct_evidence(ds, spec)), from, to);
  Sink sink(flags.output);
  if (format == "dot") {
    write_dot(sink.stream(), flows);
  } else {
    sink.stream() << to_json(flows) << '\n';
  }
  return 0;
}

int cmd_verify(const ModelFlags& flags, double tolerance) {
  const auto ds = flags.load();
  const auto spec = flags.spec();
  std::vector<VerificationReport> reports = {
      verify_conjecture1(ds, spec, tolerance),
      verify_conjecture2(ds, spec, tolerance),
      verify_model_equivalence(ds, spec),
  };
  // Conservation over every comparison, reported as the worst one.
  VerificationReport conservation;
  for (std::size_t j = 0; j < ds.num_treatments(); ++j) {
    for (std::size_t k = j + 1; k < ds.num_treatments(); ++k) {
      const auto r = verify_flow_conservation(ds, spec, TreatmentId{j}, TreatmentId{k});
      if (conservation.name.empty() || r.max_abs_diff > conservation.max_abs_diff) conservation = r;
      conservation.pass = conservation.pass && r.pass;
    }
  }
  reports.push_back(conservation);

  json out = json::array();
  bool pass = true;
  for (const auto& r : reports) {
    out.push_back(json::parse(r.to_json()));
    pass = pass && r.pass;
  }
  Sink sink(flags.output);
  sink.stream() << out.dump(2) << '\n';
  return pass ? 0 : kExitVerificationFailed;
}

json degree_json(const DegreeStats& d) { return {{"mean", d.mean}, {"min", d.min}, {"max", d.max}}; }

int cmd_metrics(const ModelFlags& flags) {
  const auto ds = flags.load();
  const auto g = bipartite_from_dataset(ds, flags.spec());
  const auto bi = graph_metrics(g);
  const auto uni = graph_metrics(unipartite_projection(g));
  const json out = {
      {"unipartite",
       {{"nodes", uni.nodes},
        {"edges", uni.edges},
        {"degree", degree_json(uni.degree)},
        {"density", uni.density},
        {"radius", uni.radius},
        {"mean_distance", uni.mean_distance}}},
      {"bipartite",
       {{"trials", bi.trials},
        {"treatments", bi.treatments},
        {"edges", bi.edges},
        {"trial_degree", degree_json(bi.trial_degree)},
        {"treatment_degree", degree_json(bi.treatment_degree)},
        {"density", bi.density},
        {"radius", bi.radius},
        {"mean_distance", bi.mean_distance}}},
  };
  Sink sink(flags.output);
  sink.stream() << out.dump(2) << '\n';
  return 0;
}

int cmd_ingest_check(const ModelFlags& flags) {
  const auto ds = flags.load();
  const json out = {{"treatments", ds.treatment_labels()},
                    {"trials", ds.num_trials()},
                    {"arms", ds.num_arms()},
                    {"contrasts", ds.num_contrasts()},
                    {"baseline", ds.label(ds.baseline())}};
  Sink sink(flags.output);
  sink.stream() << out.dump(2) << '\n';
  return 0;
}

struct SimulateFlags {
  SimConfig config;
  std::string output;
  std::string summary;
  std::string metrics_csv;
};

int cmd_simulate(const SimulateFlags& flags) {
  validate(flags.config);
  const auto report = run_simulation(flags.config);
  {
    Sink sink(flags.output);
    write_records_jsonl(sink.stream(), report);
  }
  if (!flags.summary.empty()) {
    Sink sink(flags.summary);
    sink.stream() << summary_json(flags.config, report) << '\n';
  } else {
    std::cerr << summary_json(flags.config, report) << '\n';
  }
  if (!flags.metrics_csv.empty()) {
    Sink sink(flags.metrics_csv);
    write_metrics_csv(sink.stream(), report);
  }
  const auto n = report.networks.size();
  return report.conjecture1_passes == n && report.conjecture2_passes == n ? 0 : kExitVerificationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence flow in network meta-analysis: hat matrices, flows, random walks and simulation"};
  app.require_subcommand(1);

  ModelFlags model;
  std::vector<std::string> which;
  std::string matrix_format = "json";
  auto* matrices = app.add_subcommand("matrices", "Emit labeled model and graph matrices");
  add_model_flags(matrices, model);
  matrices->add_option("--which", which, "Matrices to emit (comma separated, or 'all')")->delimiter(',');
  matrices->add_option("--format", matrix_format, "Output format")->check(CLI::IsMember({"json", "csv", "pretty"}));

  std::string from;
  std::string to;
  std::string graph_kind = "uni";
  std::string flow_format = "json";
  auto* flow = app.add_subcommand("flow", "Evidence flow network for one comparison");
  add_model_flags(flow, model);
  flow->add_option("--from", from, "Source treatment")->required();
  flow->add_option("--to", to, "Sink treatment")->required();
  flow->add_option("--graph", graph_kind, "Aggregate (uni) or arm-level (bi) flow")
      ->check(CLI::IsMember({"uni", "bi"}));
  flow->add_option("--format", flow_format, "Output format")->check(CLI::IsMember({"json", "dot"}));

  double tolerance = kDefaultTolerance;
  auto* verify = app.add_subcommand("verify", "Check both conjectures, conservation and model equivalence");
  add_model_flags(verify, model);
  verify->add_option("--tolerance", tolerance, "Tolerance for the conjecture checks")->check(CLI::NonNegativeNumber);

  auto* metrics = app.add_subcommand("metrics", "Structural metrics of both graphs");
  add_model_flags(metrics, model);

  auto* ingest = app.add_subcommand("ingest-check", "Validate an input file and summarize it");
  add_model_flags(ingest, model);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Verify both conjectures on random networks");
  simulate->add_option("--networks", sim.config.n_networks, "Number of networks");
  simulate->add_option("--seed", sim.config.seed, "Base seed");
  simulate->add_option("--min-treatments", sim.config.min_treatments);
  simulate->add_option("--max-treatments", sim.config.max_treatments);
  simulate->add_option("--min-trials", sim.config.min_trials);
  simulate->add_option("--max-trials", sim.config.max_trials);
  simulate->add_option("--min-variance-scale", sim.config.min_variance_scale);
  simulate->add_option("--max-variance-scale", sim.config.max_variance_scale);
  simulate->add_option("--tolerance", sim.config.tolerance, "Tolerance for the conjecture checks");
  simulate->add_option("--output,-o", sim.output, "JSON lines, one record per network (default stdout)");
  simulate->add_option("--summary", sim.summary, "Summary JSON file (default stderr)");
  simulate->add_option("--metrics-csv", sim.metrics_csv, "Graph metric summary as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalidInput;
  }

  try {
    if (*matrices) return cmd_matrices(model, which, matrix_format);
    if (*flow) return cmd_flow(model, from, to, graph_kind, flow_format);
    if (*verify) return cmd_verify(model, tolerance);
    if (*metrics) return cmd_metrics(model);
    if (*ingest) return cmd_ingest_check(model);
    if (*simulate) return cmd_simulate(sim);
  } catch (const Error& e) {
    std::cerr << json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
    return kExitInvalidInput;
  }
  return 0;
}
