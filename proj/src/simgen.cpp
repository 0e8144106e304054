#include "evflow/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "evflow/error.hpp"
#include "evflow/parallel.hpp"

namespace evflow {

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

// Nodes 0..M-1 are trials, M..M+N-1 treatments.
UnionFind components_of(const BipartiteStructure& graph) {
  const std::size_t m = graph.trials.size();
  UnionFind uf(m + graph.treatments);
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto t : graph.trials[i]) uf.unite(i, m + t);
  }
  return uf;
}

template <class T>
T pick(const std::vector<T>& items, std::mt19937_64& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

std::string padded(char prefix, std::size_t value, std::size_t width) {
  std::ostringstream out;
  out << prefix << std::setw(static_cast<int>(width)) << std::setfill('0') << value;
  return out.str();
}

std::size_t digits(std::size_t n) { return std::to_string(n).size(); }

nlohmann::ordered_json report_json(const VerificationReport& r) {
  return {{"max_abs_diff", r.max_abs_diff}, {"tolerance", r.tolerance}, {"pass", r.pass}, {"dims", {r.rows, r.cols}}};
}

SummaryStat summarize(std::string metric, const std::vector<double>& values) {
  SummaryStat s{std::move(metric)};
  if (values.empty()) return s;
  const auto n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

}  // namespace

void validate(const SimConfig& c) {
  const auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (c.min_treatments < 2) fail("at least two treatments are required");
  if (c.min_treatments > c.max_treatments) fail("treatment range is empty");
  if (c.min_trials < 1) fail("at least one trial is required");
  if (c.min_trials > c.max_trials) fail("trial range is empty");
  if (!(c.min_variance_scale > 0.0) || !(c.min_variance_scale <= c.max_variance_scale) ||
      !std::isfinite(c.max_variance_scale)) {
    fail("variance scale range must be positive and nonempty");
  }
  if (!(c.tolerance > 0.0)) fail("tolerance must be positive");
}

std::size_t BipartiteStructure::edge_count() const {
  std::size_t k = 0;
  for (const auto& t : trials) k += t.size();
  return k;
}

bool BipartiteStructure::has_edge(std::size_t trial, std::size_t treatment) const {
  return std::binary_search(trials[trial].begin(), trials[trial].end(), treatment);
}

void BipartiteStructure::add_edge(std::size_t trial, std::size_t treatment) {
  auto& arms = trials[trial];
  const auto it = std::lower_bound(arms.begin(), arms.end(), treatment);
  if (it == arms.end() || *it != treatment) arms.insert(it, treatment);
}

BipartiteStructure sample_structure(std::size_t treatments, std::size_t trials, std::size_t edges,
                                    std::mt19937_64& rng) {
  const std::size_t cells = treatments * trials;
  if (edges > cells) throw Error(ErrorCode::InvalidConfig, "more edges requested than trial-treatment pairs");
  std::vector<std::size_t> all(cells);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> chosen;
  chosen.reserve(edges);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), edges, rng);
  BipartiteStructure g{treatments, std::vector<std::vector<std::size_t>>(trials)};
  for (const auto cell : chosen) g.trials[cell / treatments].push_back(cell % treatments);  // already sorted
  return g;
}

void repair_min_degree(BipartiteStructure& g, std::mt19937_64& rng) {
  std::vector<std::size_t> all(g.treatments);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < g.trials.size(); ++i) {
    if (g.trials[i].empty()) {
      std::vector<std::size_t> pair;
      std::sample(all.begin(), all.end(), std::back_inserter(pair), 2, rng);
      for (const auto t : pair) g.add_edge(i, t);
    } else if (g.trials[i].size() == 1) {
      std::vector<std::size_t> others;
      for (const auto t : all) {
        if (t != g.trials[i][0]) others.push_back(t);
      }
      g.add_edge(i, pick(others, rng));
    }
  }
}

std::size_t count_components(const BipartiteStructure& g) {
  auto uf = components_of(g);
  std::size_t count = 0;
  for (std::size_t v = 0; v < uf.parent.size(); ++v) count += uf.find(v) == v ? 1 : 0;
  return count;
}

std::size_t repair_connectivity(BipartiteStructure& g, std::mt19937_64& rng) {
  const std::size_t m = g.trials.size();
  std::size_t iterations = 0;
  while (true) {
    auto uf = components_of(g);
    std::vector<std::size_t> roots;
    for (std::size_t v = 0; v < uf.parent.size(); ++v) {
      if (uf.find(v) == v) roots.push_back(v);
    }
    if (roots.size() <= 1) return iterations;
    ++iterations;

    std::vector<std::size_t> two;
    std::sample(roots.begin(), roots.end(), std::back_inserter(two), 2, rng);
    std::shuffle(two.begin(), two.end(), rng);
    std::vector<std::size_t> first_side;
    std::vector<std::size_t> second_side;
    for (std::size_t t = 0; t < g.treatments; ++t) {
      const auto root = uf.find(m + t);
      if (root == two[0]) first_side.push_back(t);
      if (root == two[1]) second_side.push_back(t);
    }
    const auto vj = pick(first_side, rng);
    const auto vk = pick(second_side, rng);

    std::vector<std::size_t> adjacent;
    for (std::size_t i = 0; i < m; ++i) {
      if (g.has_edge(i, vj) || g.has_edge(i, vk)) adjacent.push_back(i);
    }
    if (adjacent.empty()) {
      const auto trial = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
      g.add_edge(trial, vj);
      g.add_edge(trial, vk);
    } else {
      const auto trial = pick(adjacent, rng);
      g.add_edge(trial, g.has_edge(trial, vj) ? vk : vj);
    }
  }
}

SampledNetwork sample_network(const SimConfig& config, std::mt19937_64& rng) {
  validate(config);
  const auto n = std::uniform_int_distribution<std::size_t>(config.min_treatments, config.max_treatments)(rng);
  const auto m = std::uniform_int_distribution<std::size_t>(config.min_trials, config.max_trials)(rng);

  // Half-normal arm count on [2M, NM], rejection-sampled.
  const std::size_t lo = 2 * m;
  const std::size_t hi = n * m;
  std::size_t k = lo;
  if (hi > lo) {
    std::normal_distribution<double> spread(0.0, static_cast<double>(hi - lo) / 2.0);
    do {
      k = lo + static_cast<std::size_t>(std::llround(std::abs(spread(rng))));
    } while (k > hi);
  }

  auto g = sample_structure(n, m, k, rng);
  repair_min_degree(g, rng);
  repair_connectivity(g, rng);

  double scale = config.min_variance_scale;
  if (config.max_variance_scale > config.min_variance_scale) {
    scale = std::uniform_real_distribution<double>(config.min_variance_scale, config.max_variance_scale)(rng);
  }
  std::normal_distribution<double> variance_draw(0.0, scale);
  std::normal_distribution<double> mean_draw(0.0, 1.0);

  const auto tw = digits(config.max_treatments);
  const auto uw = digits(config.max_trials);
  std::vector<RawArm> arms;
  arms.reserve(g.edge_count());
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto t : g.trials[i]) {
      double variance = 0.0;
      while (variance == 0.0) variance = std::abs(variance_draw(rng));
      arms.push_back(RawArm{padded('u', i + 1, uw), padded('v', t + 1, tw), mean_draw(rng), variance});
    }
  }
  return SampledNetwork{NmaDataset::from_arms(std::move(arms)), k, scale};
}

SampledNetwork sample_network(const SimConfig& config, std::size_t index) {
  auto rng = make_stream(config.seed, index);
  return sample_network(config, rng);
}

SimulationReport run_simulation(const SimConfig& config) {
  validate(config);
  SimulationReport report;
  report.networks.resize(config.n_networks);
  const ModelSpec spec = ModelSpec::common();
  parallel_for(config.n_networks, [&](std::size_t i) {
    const auto net = sample_network(config, i);
    const auto graph = bipartite_from_dataset(net.dataset, spec);
    auto& rec = report.networks[i];
    rec.index = i;
    rec.bipartite = graph_metrics(graph);
    rec.unipartite = graph_metrics(unipartite_projection(graph));
    rec.conjecture1 = verify_conjecture1(net.dataset, spec, config.tolerance);
    rec.conjecture2 = verify_conjecture2(net.dataset, spec, config.tolerance);
  });

  std::vector<std::vector<double>> columns(17);
  for (const auto& rec : report.networks) {
    report.conjecture1_passes += rec.conjecture1.pass ? 1 : 0;
    report.conjecture2_passes += rec.conjecture2.pass ? 1 : 0;
    report.conjecture1_max_diff = std::max(report.conjecture1_max_diff, rec.conjecture1.max_abs_diff);
    report.conjecture2_max_diff = std::max(report.conjecture2_max_diff, rec.conjecture2.max_abs_diff);
    const auto& b = rec.bipartite;
    const auto& u = rec.unipartite;
    const double row[] = {static_cast<double>(b.treatments), static_cast<double>(b.trials),
                          static_cast<double>(b.edges),      static_cast<double>(u.edges),
                          b.trial_degree.mean,               b.trial_degree.min,
                          b.trial_degree.max,                b.treatment_degree.mean,
                          b.treatment_degree.min,            b.treatment_degree.max,
                          u.degree.mean,                     u.degree.min,
                          u.degree.max,                      b.density,
                          u.density,                         static_cast<double>(u.radius),
                          u.mean_distance};
    for (std::size_t c = 0; c < columns.size(); ++c) columns[c].push_back(row[c]);
  }
  static const char* const names[] = {
      "treatments",          "trials",
      "bipartite_edges",     "unipartite_edges",
      "trial_degree_mean",   "trial_degree_min",
      "trial_degree_max",    "treatment_degree_mean",
      "treatment_degree_min", "treatment_degree_max",
      "unipartite_degree_mean", "unipartite_degree_min",
      "unipartite_degree_max", "bipartite_density",
      "unipartite_density",  "unipartite_radius",
      "unipartite_mean_distance"};
  for (std::size_t c = 0; c < columns.size(); ++c) report.metrics.push_back(summarize(names[c], columns[c]));
  return report;
}

void write_records_jsonl(std::ostream& out, const SimulationReport& report) {
  for (const auto& rec : report.networks) {
    nlohmann::ordered_json j;
    j["index"] = rec.index;
    j["treatments"] = rec.bipartite.treatments;
    j["trials"] = rec.bipartite.trials;
    j["arms"] = rec.bipartite.edges;
    j["unipartite_edges"] = rec.unipartite.edges;
    j["conjecture1"] = report_json(rec.conjecture1);
    j["conjecture2"] = report_json(rec.conjecture2);
    out << j.dump() << '\n';
  }
}

std::string summary_json(const SimConfig& config, const SimulationReport& report, int indent) {
  nlohmann::ordered_json j;
  j["networks"] = report.networks.size();
  j["seed"] = config.seed;
  j["tolerance"] = config.tolerance;
  j["conjecture1"] = {{"passes", report.conjecture1_passes}, {"max_abs_diff", report.conjecture1_max_diff}};
  j["conjecture2"] = {{"passes", report.conjecture2_passes}, {"max_abs_diff", report.conjecture2_max_diff}};
  auto& metrics = j["metrics"] = nlohmann::ordered_json::array();
  for (const auto& s : report.metrics) {
    metrics.push_back({{"metric", s.metric}, {"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}});
  }
  return j.dump(indent);
}

void write_metrics_csv(std::ostream& out, const SimulationReport& report) {
  out << "metric,mean,sd,min,max\n" << std::setprecision(10);
  for (const auto& s : report.metrics) {
    out << s.metric << ',' << s.mean << ',' << s.sd << ',' << s.min << ',' << s.max << '\n';
  }
}

}  // namespace evflow
