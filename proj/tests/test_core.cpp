#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "evflow/core.hpp"
#include "evflow/error.hpp"
#include "support.hpp"

using namespace evflow;
using evflow::testing::fictional;
using evflow::testing::psoriasis;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an evflow::Error");
  return ErrorCode::Parse;
}

NmaDataset parse(const std::string& text, IngestOptions opts = {}) {
  std::istringstream in(text);
  return parse_arm_csv(in, opts);
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("psoriasis fixture has the published shape") {
    const auto ds = psoriasis();
    CHECK(ds.num_treatments() == 7);
    CHECK(ds.num_trials() == 9);
    CHECK(ds.num_arms() == 28);
    CHECK(ds.num_contrasts() == 19);
    CHECK(ds.label(ds.baseline()) == "ETN");
    const std::vector<std::string> treatments = {"ETN", "IXE_Q2W", "IXE_Q4W", "PBO", "SEC_150", "SEC_300", "UST"};
    CHECK(ds.treatment_labels() == treatments);
    CHECK(ds.trial_labels().front() == "CLEAR");
    CHECK(ds.trial_labels().back() == "UNCOVER-3");
    // Three four-arm trials.
    int four_arm = 0;
    for (std::size_t i = 0; i < ds.num_trials(); ++i) four_arm += ds.trial_arms(TrialId{i}).size() == 4 ? 1 : 0;
    CHECK(four_arm == 3);
  }

  TEST_CASE("validation errors") {
    CHECK(code_of([] { load_arm_csv(testing::data_path("single_arm.csv")); }) == ErrorCode::SingleArmTrial);
    CHECK(code_of([] { load_arm_csv(testing::data_path("disconnected.csv")); }) == ErrorCode::DisconnectedNetwork);
    CHECK(code_of([] { parse("study,treatment,mean\nt,a,1\n"); }) == ErrorCode::MissingColumn);
    CHECK(code_of([] { parse("study,treatment,mean,variance\nt,a,0,1\nt,a,1,1\n"); }) == ErrorCode::DuplicateArm);
    CHECK(code_of([] { parse("study,treatment,mean,variance\nt,a,0,0\nt,b,1,1\n"); }) ==
          ErrorCode::NonpositiveVariance);
    CHECK(code_of([] { parse("study,treatment,mean,variance\nt,a,0,-1\nt,b,1,1\n"); }) ==
          ErrorCode::NonpositiveVariance);
    CHECK(code_of([] { parse("study,treatment,events,total\nt,a,0,10\nt,b,3,10\n"); }) ==
          ErrorCode::ZeroOrFullEvents);
    CHECK(code_of([] { parse("study,treatment,events,total\nt,a,10,10\nt,b,3,10\n"); }) ==
          ErrorCode::ZeroOrFullEvents);
    CHECK(code_of([] { parse("study,treatment,mean,variance\nt,a,x,1\nt,b,1,1\n"); }) == ErrorCode::Parse);
    IngestOptions opts;
    opts.baseline = "zzz";
    CHECK(code_of([&] { parse("study,treatment,mean,variance\nt,a,0,1\nt,b,1,1\n", opts); }) ==
          ErrorCode::UnknownTreatment);
  }

  TEST_CASE("log-odds transform and continuity correction") {
    const auto lo = log_odds(3, 10);
    CHECK(lo.mean == doctest::Approx(std::log(3.0 / 7.0)));
    CHECK(lo.variance == doctest::Approx(1.0 / 3.0 + 1.0 / 7.0));

    IngestOptions opts;
    opts.continuity_correction = true;
    const auto ds = parse("study,treatment,events,total\nt,a,0,10\nt,b,3,10\ns,a,2,10\ns,c,5,10\n", opts);
    // Trial t is corrected in every cell, trial s is untouched.
    const auto t = ds.trial_arms(TrialId{1});
    CHECK(t[0].mean == doctest::Approx(std::log(0.5 / 10.5)));
    CHECK(t[0].variance == doctest::Approx(1.0 / 0.5 + 1.0 / 10.5));
    CHECK(t[1].mean == doctest::Approx(std::log(3.5 / 7.5)));
    const auto s = ds.trial_arms(TrialId{0});
    CHECK(s[0].mean == doctest::Approx(std::log(2.0 / 8.0)));
  }

  TEST_CASE("contrast map blocks") {
    const auto c = build_contrast_map(fictional());
    CHECK(c.rows() == 7);
    CHECK(c.cols() == 12);
    // Trial 2 [a,b,c] occupies rows 1-2 and arm columns 2-4.
    Eigen::MatrixXd block(2, 3);
    block << -1, 1, 0, -1, 0, 1;
    CHECK(max_abs_diff(Eigen::MatrixXd(c.values.block(1, 2, 2, 3)), block) == 0.0);
    CHECK(c.values.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index r = 0; r < c.rows(); ++r) CHECK((c.values.row(r).array() != 0.0).count() == 2);

    const auto one = build_contrast_map(load_arm_csv(testing::data_path("single_trial.csv")));
    CHECK(one.values.rows() == 1);
    CHECK(one.values(0, 0) == -1.0);
    CHECK(one.values(0, 1) == 1.0);

    const auto ps = build_contrast_map(psoriasis());
    CHECK(ps.rows() == 19);
    CHECK(ps.cols() == 28);
    CHECK(ps.values.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("C applied to arm means gives the contrast observations") {
    for (const auto& ds : {fictional(), psoriasis()}) {
      const auto c = build_contrast_map(ds);
      CHECK(max_abs_diff(Eigen::MatrixXd(c.values * arm_means(ds)), Eigen::MatrixXd(contrast_observations(ds))) <
            1e-15);
    }
  }

  TEST_CASE("design matrix follows the baseline rule") {
    // Hand enumeration for the fictional network with baseline a; columns b, c, d.
    Eigen::MatrixXd expected(7, 3);
    expected << 1, 0, 0,  // 1: a->b
        1, 0, 0,          // 2: a->b
        0, 1, 0,          // 2: a->c
        0, 0, 1,          // 3: a->d
        -1, 1, 0,         // 4: b->c
        -1, 0, 1,         // 4: b->d
        0, -1, 1;         // 5: c->d
    const auto x = build_design_matrix(fictional());
    CHECK(max_abs_diff(x.values, expected) == 0.0);
    CHECK(x.col_labels == std::vector<std::string>{"[a,b]", "[a,c]", "[a,d]"});

    const auto single = build_design_matrix(load_arm_csv(testing::data_path("single_trial.csv")));
    CHECK(single.values.rows() == 1);
    CHECK(single.values(0, 0) == 1.0);

    const auto bc = testing::from_rows({{"t1", "a", 0, 1}, {"t1", "b", 0, 1}, {"t2", "b", 0, 1}, {"t2", "c", 0, 1}});
    const auto xb = build_design_matrix(bc);
    CHECK(xb.values(1, 0) == -1.0);
    CHECK(xb.values(1, 1) == 1.0);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(build_design_matrix(psoriasis()).values);
    CHECK(lu.rank() == 6);
  }

  TEST_CASE("covariance blocks") {
    const auto three = testing::from_rows({{"t", "a", 0, 0.4}, {"t", "b", 0, 0.6}, {"t", "c", 0, 0.5}});
    const auto cov = build_covariance(three, ModelSpec::common());
    Eigen::MatrixXd expected(2, 2);
    expected << 1.0, 0.4, 0.4, 0.9;
    CHECK(max_abs_diff(cov.covariance.values, expected) < 1e-15);
    CHECK(max_abs_diff(Eigen::MatrixXd(cov.covariance.values * cov.weights.values), Eigen::MatrixXd::Identity(2, 2)) <
          1e-14);

    const auto two = testing::from_rows({{"t", "a", 0, 0.5}, {"t", "b", 0, 0.5}});
    CHECK(build_covariance(two, ModelSpec::common()).weights.values(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    // Random effects: diagonal gains tau^2, off-diagonal tau^2/2.
    const auto re = build_covariance(three, ModelSpec::random(1.0));
    CHECK(re.covariance.values(0, 0) == doctest::Approx(2.0));
    CHECK(re.covariance.values(0, 1) == doctest::Approx(0.9));

    // Trial-1 block of the fictional network is the scalar 1 / (0.2 + 0.3).
    const auto w = build_covariance(fictional(), ModelSpec::common()).weights;
    CHECK(w.values(0, 0) == doctest::Approx(2.0));
    CHECK(w.values.isApprox(w.values.transpose()));
    Eigen::LLT<Eigen::MatrixXd> llt(w.values);
    CHECK(llt.info() == Eigen::Success);
  }

  TEST_CASE("row order does not change any matrix") {
    const auto base = psoriasis();
    std::vector<RawArm> rows;
    for (const auto& arm : base.arms()) {
      rows.push_back(RawArm{base.label(arm.trial), base.label(arm.treatment), arm.mean, arm.variance});
    }
    std::mt19937_64 rng(7);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto shuffled = NmaDataset::from_arms(rows);
    CHECK(build_contrast_map(shuffled).values == build_contrast_map(base).values);
    CHECK(build_design_matrix(shuffled).values == build_design_matrix(base).values);
    CHECK(build_covariance(shuffled, ModelSpec::common()).weights.values ==
          build_covariance(base, ModelSpec::common()).weights.values);
  }

  TEST_CASE("schema A round trip") {
    const auto ds = fictional();
    std::ostringstream out;
    write_arm_csv(out, ds);
    const auto again = parse(out.str());
    CHECK(arm_means(again) == arm_means(ds));
    CHECK(arm_resistances(again, ModelSpec::common()) == arm_resistances(ds, ModelSpec::common()));
  }

  TEST_CASE("baseline override moves the reference treatment") {
    IngestOptions opts;
    opts.continuity_correction = true;
    opts.baseline = "PBO";
    const auto ds = load_arm_csv(testing::data_path("psoriasis.csv"), opts);
    CHECK(ds.label(ds.baseline()) == "PBO");
    CHECK(ds.basic_comparison_labels().front() == "[PBO,ETN]");
    const auto cn = build_baseline_contrasts(ds);
    CHECK(cn.values(0, 3) == -1.0);
    CHECK(cn.values(0, 0) == 1.0);
  }
}
