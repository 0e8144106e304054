// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "evflow/conjectures.hpp"
#include "evflow/graphs.hpp"
#include "evflow/hat.hpp"
#include "evflow/randomwalk.hpp"
#include "evflow/simgen.hpp"
#include "properties.hpp"
#include "support.hpp"

using namespace evflow;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

UnipartiteGraph weighted_projection(const NmaDataset& ds) {
  const auto spec = ModelSpec::common();
  return unipartite_projection(bipartite_from_dataset(ds, spec), direct_evidence(ds, spec));
}

Outcome aggregate_row() {
  const auto start = Clock::now();
  const auto ds = testing::psoriasis();
  const auto hats = compute_hat_matrices(ds, ModelSpec::common());
  const auto row = expand_consistency(hats.aggregate, ds, ds.treatment("IXE_Q2W"), ds.treatment("SEC_300"));
  const double dev = testing::max_deviation(row.values, testing::kPsoriasisAggregateRow);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {dev <= testing::kDisplayTolerance && secs < 1.0,
          fmt("max deviation %.2e (tol 5e-4), runtime %.3f s (limit 1 s)", dev, secs)};
}

Outcome arm_row() {
  const auto ds = testing::psoriasis();
  const auto hats = compute_hat_matrices(ds, ModelSpec::common());
  const auto row = expand_consistency(hats.arm_level, ds, ds.treatment("IXE_Q2W"), ds.treatment("SEC_300"));
  const double dev = testing::max_deviation(row.values, testing::kPsoriasisArmRow);
  return {dev <= testing::kDisplayTolerance, fmt("28 values, max deviation %.2e (tol 5e-4)", dev)};
}

Outcome transition_rows() {
  const auto ds = testing::psoriasis();
  const auto g = bipartite_from_dataset(ds, ModelSpec::common());
  const auto t = transition_unipartite(weighted_projection(ds));
  const auto down = transition_down(g);
  const auto up = transition_up(g);
  const double dev = std::max({std::abs(t.at("IXE_Q4W", "ETN") - 0.491), std::abs(t.at("IXE_Q4W", "IXE_Q2W") - 0.351),
                               std::abs(t.at("IXE_Q4W", "PBO") - 0.158), std::abs(down.at("CLEAR", "SEC_300") - 0.330),
                               std::abs(down.at("CLEAR", "UST") - 0.670), std::abs(up.at("IXE_Q4W", "UNCOVER-1") - 0.377),
                               std::abs(up.at("IXE_Q4W", "UNCOVER-2") - 0.350),
                               std::abs(up.at("IXE_Q4W", "UNCOVER-3") - 0.273)});
  return {dev <= testing::kDisplayTolerance, fmt("T, P_down, P_up rows, max deviation %.2e (tol 5e-4)", dev)};
}

Outcome fictional_example() {
  const auto ds = testing::fictional();
  const auto ev = direct_evidence(ds, ModelSpec::common());
  const double dev = testing::max_deviation(ev.weights, testing::kFictionalWeights);
  const auto row = expand_consistency(compute_hat_matrices(ds, ModelSpec::common()).aggregate, ds, TreatmentId{0},
                                      TreatmentId{1});
  const double cd = row.at("[c,d]");
  return {dev <= testing::kDisplayTolerance && std::abs(cd + 0.02) <= 0.005,
          fmt("weights max deviation %.2e (tol 5e-4), [c,d] = %.4f (want -0.02 +/- 0.005)", dev, cd)};
}

Outcome report_outcome(const VerificationReport& r) {
  return {r.pass, fmt("max |diff| %.2e (tol %.2e), %ldx%ld", r.max_abs_diff, r.tolerance, static_cast<long>(r.rows),
                      static_cast<long>(r.cols))};
}

Outcome simulation() {
  const auto start = Clock::now();
  const SimConfig config;
  const auto report = run_simulation(config);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  const auto n = report.networks.size();
  return {n == 1000 && report.conjecture1_passes == n && report.conjecture2_passes == n && secs < 600.0,
          fmt("%zu networks, conjecture 1 %zu/%zu (max %.2e), conjecture 2 %zu/%zu (max %.2e), %.1f s", n,
              report.conjecture1_passes, n, report.conjecture1_max_diff, report.conjecture2_passes, n,
              report.conjecture2_max_diff, secs)};
}

Outcome properties() {
  SimConfig config;
  config.n_networks = 200;
  config.seed = 7;
  const auto m = testing::check_properties(config);
  const bool pass = m.estimate_equivalence < 1e-10 && m.flow_conservation < 1e-10 && m.stochasticity < 1e-12 &&
                    m.multiarm_round_trip < 1e-10 && m.walk_oracle < 1e-10 &&
                    m.comparisons == config.n_networks * testing::kComparisonsPerNetwork;
  return {pass, fmt("%zu networks, %zu comparisons, %zu multi-arm trials; estimates %.1e, conservation %.1e, "
                    "stochasticity %.1e, round trip %.1e, walk oracle %.1e",
                    m.networks, m.comparisons, m.multiarm_trials, m.estimate_equivalence, m.flow_conservation,
                    m.stochasticity, m.multiarm_round_trip, m.walk_oracle)};
}

Outcome monte_carlo() {
  const auto ds = testing::fictional();
  const auto chain = unipartite_chain(weighted_projection(ds));
  const auto row = expand_consistency(compute_hat_matrices(ds, ModelSpec::common()).aggregate, ds, TreatmentId{0},
                                      TreatmentId{1});
  MonteCarloOptions opts;
  opts.walks = 1'000'000;
  opts.seed = 20240601;
  const auto mc = monte_carlo_crossings(chain, TreatmentId{0}, TreatmentId{1}, opts);
  double worst = 0.0;
  for (Eigen::Index e = 0; e < mc.net.size(); ++e) {
    worst = std::max(worst, std::abs(mc.net(e) - row.values(e)) / mc.standard_error(e));
  }
  return {worst <= 3.0, fmt("%zu walks, worst |z| = %.2f (limit 3)", mc.walks, worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"psoriasis aggregate flow row", aggregate_row},
      {"psoriasis arm-level flow row", arm_row},
      {"psoriasis transition rows", transition_rows},
      {"fictional weights and [c,d] flow", fictional_example},
      {"conjecture 1 on psoriasis",
       [] { return report_outcome(verify_conjecture1(testing::psoriasis(), ModelSpec::common())); }},
      {"conjecture 2 on psoriasis",
       [] { return report_outcome(verify_conjecture2(testing::psoriasis(), ModelSpec::common())); }},
      {"simulation of 1000 networks", simulation},
      {"randomized property suites", properties},
      {"Monte Carlo crossings", monte_carlo},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += out.pass ? 0 : 1;
    std::printf("%s criterion %zu: %s; %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
