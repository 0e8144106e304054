#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "evflow/core.hpp"

namespace evflow::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(EVFLOW_TEST_DATA) / name;
}

/// Plaque psoriasis network: 7 treatments, 9 trials, 28 arms. FEATURE has a
/// zero-event placebo arm, so the continuity correction is on.
inline NmaDataset psoriasis() {
  IngestOptions opts;
  opts.continuity_correction = true;
  return load_arm_csv(data_path("psoriasis.csv"), opts);
}

/// Five-trial fictional network over a, b, c, d.
inline NmaDataset fictional() { return load_arm_csv(data_path("fictional.csv")); }

inline NmaDataset from_rows(std::vector<RawArm> rows) { return NmaDataset::from_arms(std::move(rows)); }

/// Published consistency-expanded aggregate row (IXE_Q2W, SEC_300), in
/// unipartite edge order.
inline const std::array<double, 13> kPsoriasisAggregateRow = {
    -0.399, -0.234, 0.018, 0.256, 0.359, 0.329, 0.145, 0.127, 0.095, 0.108, 0.151, 0.363, -0.127};

/// Published consistency-expanded arm-level row (IXE_Q2W, SEC_300), in arm order.
inline const std::array<double, 28> kPsoriasisArmRow = {
    0.127,  -0.127, -0.118, -0.096, 0.214,  -0.006, -0.043, 0.049, -0.621, -0.104,
    0.157,  0.567,  -0.127, 0.127,  -0.025, -0.019, 0.043,  -0.265, 0.109, 0.156,
    0.303,  -0.267, -0.056, 0.021,  0.318,  -0.340, -0.053, 0.076};

/// Published aggregate weights of the fictional network, edges ab ac ad bc bd cd.
inline const std::array<double, 6> kFictionalWeights = {2.676, 0.811, 0.588, 0.817, 0.304, 1.443};

/// Display-rounding tolerance for three-decimal published values.
inline constexpr double kDisplayTolerance = 0.0005;

template <std::size_t N>
double max_deviation(const Eigen::VectorXd& actual, const std::array<double, N>& expected) {
  if (static_cast<std::size_t>(actual.size()) != N) return 1e300;
  double worst = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    worst = std::max(worst, std::abs(actual(static_cast<Eigen::Index>(i)) - expected[i]));
  }
  return worst;
}

}  // namespace evflow::testing
