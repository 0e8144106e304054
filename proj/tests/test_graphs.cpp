#include <doctest.h>

#include <sstream>

#include "evflow/error.hpp"
#include "evflow/graphs.hpp"
#include "evflow/hat.hpp"
#include "support.hpp"

using namespace evflow;
using evflow::testing::fictional;
using evflow::testing::psoriasis;

namespace {

// Three trials u1=[b,c], u2=[c,e,f], u3=[a,b,d,e] over treatments a-f.
BipartiteGraph figure_one() {
  const std::vector<std::vector<std::size_t>> arms = {{1, 2}, {2, 4, 5}, {0, 1, 3, 4}};
  std::vector<BipartiteEdge> edges;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    for (const auto t : arms[i]) edges.push_back(BipartiteEdge{i, t, 1.0});
  }
  return BipartiteGraph({"u1", "u2", "u3"}, {"a", "b", "c", "d", "e", "f"}, edges);
}

}  // namespace

TEST_SUITE("graphs") {
  TEST_CASE("bipartite adjacency of the six-treatment example") {
    Eigen::MatrixXd expected(9, 9);
    expected << 0, 0, 0, 0, 1, 1, 0, 0, 0,  //
        0, 0, 0, 0, 0, 1, 0, 1, 1,          //
        0, 0, 0, 1, 1, 0, 1, 1, 0,          //
        0, 0, 1, 0, 0, 0, 0, 0, 0,          //
        1, 0, 1, 0, 0, 0, 0, 0, 0,          //
        1, 1, 0, 0, 0, 0, 0, 0, 0,          //
        0, 0, 1, 0, 0, 0, 0, 0, 0,          //
        0, 1, 1, 0, 0, 0, 0, 0, 0,          //
        0, 1, 0, 0, 0, 0, 0, 0, 0;
    const auto a = adjacency(figure_one());
    CHECK(a.values == expected);
    CHECK(a.values == a.values.transpose());
    CHECK(a.values.topLeftCorner(3, 3).isZero());
    CHECK(a.values.bottomRightCorner(6, 6).isZero());
  }

  TEST_CASE("bipartite incidence of the six-treatment example") {
    const auto g = figure_one();
    const auto unoriented = incidence(g, false);
    const auto oriented = incidence(g, true);
    REQUIRE(unoriented.rows() == 9);
    REQUIRE(unoriented.cols() == 9);
    CHECK(unoriented.row_labels.front() == "[u1,b]");
    CHECK(unoriented.row_labels[2] == "[u2,c]");
    CHECK(unoriented.row_labels.back() == "[u3,e]");
    // Row [u2,e]: trial column 1, treatment column 3 + 4.
    CHECK(unoriented.at("[u2,e]", "u2") == 1.0);
    CHECK(unoriented.at("[u2,e]", "e") == 1.0);
    CHECK(oriented.at("[u2,e]", "u2") == -1.0);
    CHECK(oriented.at("[u2,e]", "e") == 1.0);
    CHECK((unoriented.values.rowwise().sum().array() == 2.0).all());
    CHECK(oriented.values.rowwise().sum().isZero());
    // Column sums of the unoriented incidence are the node degrees.
    const Eigen::VectorXd degrees = adjacency(g).values.rowwise().sum();
    CHECK(unoriented.values.colwise().sum().transpose() == degrees);
  }

  TEST_CASE("unipartite projection of the six-treatment example") {
    const auto uni = unipartite_projection(figure_one());
    CHECK(uni.edges().size() == 10);
    Eigen::MatrixXd expected(6, 6);
    expected << 0, 1, 0, 1, 1, 0,  //
        1, 0, 1, 1, 1, 0,          //
        0, 1, 0, 0, 1, 1,          //
        1, 1, 0, 0, 1, 0,          //
        1, 1, 1, 1, 0, 1,          //
        0, 0, 1, 0, 1, 0;
    CHECK(adjacency(uni).values == expected);
    const auto b = incidence(uni, false);
    CHECK(b.rows() == 10);
    CHECK((b.values.rowwise().sum().array() == 2.0).all());
    CHECK(b.values.colwise().sum().transpose() == expected.rowwise().sum());
    CHECK(incidence(uni, true).values.rowwise().sum().isZero());
  }

  TEST_CASE("single edge incidence") {
    const UnipartiteGraph g({"a", "b"}, {{1, 0, 2.0}});
    const auto b = incidence(g, true);
    CHECK(b.values(0, 0) == -1.0);
    CHECK(b.values(0, 1) == 1.0);
    CHECK_THROWS_AS(UnipartiteGraph({"a", "b"}, {{0, 0, 1.0}}), Error);
    CHECK_THROWS_AS(UnipartiteGraph({"a", "b"}, {{0, 1, 1.0}, {1, 0, 1.0}}), Error);
  }

  TEST_CASE("psoriasis bipartite graph") {
    const auto ds = psoriasis();
    const auto g = bipartite_from_dataset(ds, ModelSpec::common());
    CHECK(g.node_labels().size() == 16);
    CHECK(g.edges().size() == 28);
    const auto b = biadjacency(g);
    CHECK(b.rows() == 9);
    CHECK(b.cols() == 7);
    const Eigen::MatrixXd structure = (b.values.array() > 0.0).cast<double>();
    CHECK(structure.row(*b.row_index("JUNCTURE")).sum() == 3.0);
    CHECK(structure.col(*b.col_index("UST")).sum() == 2.0);
    CHECK(max_abs_diff(Eigen::MatrixXd(b.values.rowwise().sum()), Eigen::MatrixXd(g.trial_strengths())) < 1e-12);
    CHECK(max_abs_diff(Eigen::MatrixXd(b.values.colwise().sum().transpose()),
                       Eigen::MatrixXd(g.treatment_strengths())) < 1e-12);

    const auto uni = unipartite_projection(g, direct_evidence(ds, ModelSpec::common()));
    CHECK(uni.edges().size() == 13);
  }

  TEST_CASE("arm weights are inverse arm variances") {
    const auto ds = fictional();
    const auto ce = bipartite_from_dataset(ds, ModelSpec::common());
    CHECK(ce.edges()[0].weight == doctest::Approx(5.0));
    const auto re = bipartite_from_dataset(ds, ModelSpec::random(0.4));
    for (std::size_t e = 0; e < ce.edges().size(); ++e) CHECK(re.edges()[e].weight < ce.edges()[e].weight);
  }

  TEST_CASE("projection matches the pairs compared within trials") {
    const auto ds = psoriasis();
    const auto g = bipartite_from_dataset(ds, ModelSpec::common());
    const auto ev = direct_evidence(ds, ModelSpec::common());
    CHECK(unipartite_projection(g).edge_labels() == ev.edge_labels);

    const auto clique = testing::from_rows({{"t", "a", 0, 1}, {"t", "b", 0, 1}, {"t", "c", 0, 1}, {"t", "d", 0, 1}});
    const auto cg = unipartite_projection(bipartite_from_dataset(clique, ModelSpec::common()));
    CHECK(cg.edges().size() == 6);
    const auto m = graph_metrics(cg);
    CHECK(m.density == 1.0);
    CHECK(m.radius == 1);
    CHECK(m.mean_distance == 1.0);
  }

  TEST_CASE("graph metrics of the psoriasis network") {
    const auto g = bipartite_from_dataset(psoriasis(), ModelSpec::common());
    const auto uni = graph_metrics(unipartite_projection(g));
    CHECK(uni.nodes == 7);
    CHECK(uni.edges == 13);
    CHECK(uni.density == doctest::Approx(13.0 / 21.0));
    const auto bi = graph_metrics(g);
    CHECK(bi.density == doctest::Approx(28.0 / 63.0));
    CHECK(bi.trial_degree.min == 2);
    CHECK(bi.trial_degree.max == 4);
    CHECK(bi.trial_degree.mean == doctest::Approx(28.0 / 9.0));
    CHECK(bi.treatment_degree.mean == doctest::Approx(28.0 / 7.0));
  }

  TEST_CASE("flow networks") {
    const auto ds = fictional();
    const auto spec = ModelSpec::common();
    const auto hats = compute_hat_matrices(ds, spec);
    const auto ev = direct_evidence(ds, spec);
    const auto g = bipartite_from_dataset(ds, spec);
    const auto uni = unipartite_projection(g, ev);
    const TreatmentId a{0};
    const TreatmentId b{1};

    const auto flows = flow_network(expand_consistency(hats.aggregate, ds, a, b), uni, a, b);
    CHECK(flows.flows.size() == 6);
    const auto& cd = flows.flows.back();
    CHECK(cd.edge == "[c,d]");
    CHECK(cd.from == "d");
    CHECK(cd.to == "c");
    CHECK(std::abs(cd.magnitude - 0.02) < 0.005);
    CHECK(flows.conservation_residual < 1e-12);

    const auto bi = flow_network(expand_consistency(hats.arm_level, ds, a, b), g, a, b);
    CHECK(bi.flows.size() == 12);
    CHECK(bi.top_nodes.size() == 5);

    // Same comparison: every flow vanishes.
    const auto none = flow_network(expand_consistency(hats.aggregate, ds, a, a), uni, a, a);
    for (const auto& f : none.flows) CHECK(f.magnitude == 0.0);

    // A row from the other graph does not fit.
    CHECK_THROWS_AS(flow_network(expand_consistency(hats.arm_level, ds, a, b), uni, a, b), Error);

    // A perturbed row breaks conservation.
    auto bad = expand_consistency(hats.aggregate, ds, a, b);
    bad.values(2) += 0.1;
    try {
      flow_network(bad, uni, a, b);
      FAIL("expected ConservationViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConservationViolation);
    }
  }

  TEST_CASE("single trial flow") {
    const auto ds = load_arm_csv(testing::data_path("single_trial.csv"));
    const auto hats = compute_hat_matrices(ds, ModelSpec::common());
    const auto g = bipartite_from_dataset(ds, ModelSpec::common());
    const auto uni = unipartite_projection(g, direct_evidence(ds, ModelSpec::common()));
    const auto f = flow_network(expand_consistency(hats.aggregate, ds, TreatmentId{0}, TreatmentId{1}), uni,
                                TreatmentId{0}, TreatmentId{1});
    REQUIRE(f.flows.size() == 1);
    CHECK(f.flows[0].from == "a");
    CHECK(f.flows[0].to == "b");
    CHECK(f.flows[0].magnitude == doctest::Approx(1.0));
  }

  TEST_CASE("exports") {
    const auto ds = fictional();
    const auto hats = compute_hat_matrices(ds, ModelSpec::common());
    const auto g = bipartite_from_dataset(ds, ModelSpec::common());
    std::ostringstream dot;
    write_dot(dot, g);
    CHECK(dot.str().find("rank=same") != std::string::npos);

    const auto flows = flow_network(expand_consistency(hats.arm_level, ds, TreatmentId{0}, TreatmentId{1}), g,
                                    TreatmentId{0}, TreatmentId{1});
    std::ostringstream fdot;
    write_dot(fdot, flows);
    CHECK(fdot.str().find("digraph") != std::string::npos);
    CHECK(fdot.str().find("penwidth") != std::string::npos);
    const auto json = to_json(flows);
    CHECK(json.find("\"source\": \"a\"") != std::string::npos);
    CHECK(json.find("\"flows\"") != std::string::npos);
  }
}
