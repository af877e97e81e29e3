#include "doctest.h"

#include <set>

#include "fixtures.hpp"

using namespace pmugbp;
using fixtures::triangle_graph;

namespace {

void check_stats(const FactorGraph& g, Index variables, Index factors, Index edges) {
  const auto s = graph_stats(g);
  CHECK(s.variable_nodes == variables);
  CHECK(s.factor_nodes == factors);
  CHECK(s.pairwise_edges == edges);
}

}  // namespace

TEST_CASE("multivariate graph of the example") {
  const auto g = triangle_graph(GraphMode::Multivariate);
  CHECK(g.variables.size() == 3);
  CHECK(g.unary.size() == 2);
  CHECK(g.pairwise.size() == 4);
  CHECK(g.edges.size() == 8);
  check_stats(g, 3, 6, 8);
  CHECK(g.variables[2].unary.empty());
  CHECK(g.variables[0].edges.size() == 3);
}

TEST_CASE("fusion graph of the example") {
  const auto g = triangle_graph(GraphMode::Fusion);
  CHECK(g.pairwise.size() == 3);
  CHECK(g.edges.size() == 6);
  check_stats(g, 3, 5, 6);

  const Index f7 = fixtures::factor_between(g, 0, 1);
  REQUIRE(f7 >= 0);
  const auto& f = g.pairwise[static_cast<std::size_t>(f7)];
  REQUIRE(f.rows() == 4);
  const double z[] = {0.24, -0.67, -0.24, 0.67};
  const double prec[] = {0.22, 1.46, 0.22, 1.47};
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(f.z(k) - z[k]) <= 0.005);
    CHECK(std::abs(1.0 / f.sigma(k, k) / 1e5 - prec[k]) <= 0.005);
  }
  Mat y(2, 2);
  y << 2.0, 4.0, -4.0, 2.0;
  CHECK((f.blocks[0].topRows(2) - y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f.blocks[1].topRows(2) + y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f.blocks[0].bottomRows(2) + y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f.blocks[1].bottomRows(2) - y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(f.sources == std::vector<Index>{2, 4});
}

TEST_CASE("scalar graph of the example") {
  const auto g = triangle_graph(GraphMode::Scalar);
  CHECK(g.variables.size() == 6);
  CHECK(g.unary.size() + g.pairwise.size() == 12);
  CHECK(g.edges.size() == 32);
  for (const auto& f : g.pairwise) {
    CHECK(f.arity() == 4);
    CHECK(f.rows() == 1);
  }
  CHECK(g.bus_variables(1) == std::vector<Index>{2, 3});
}

TEST_CASE("fusing a single factor is a pass-through") {
  const auto g = triangle_graph(GraphMode::Multivariate);
  const auto fused = fuse_pairwise({g.pairwise[0]});
  CHECK(fused.variables == g.pairwise[0].variables);
  CHECK(fused.z == g.pairwise[0].z);
  CHECK(fused.sigma == g.pairwise[0].sigma);
  CHECK(fused.blocks[0] == g.pairwise[0].blocks[0]);
  CHECK(fused.blocks[1] == g.pairwise[0].blocks[1]);
}

TEST_CASE("fusing factors on different pairs is rejected") {
  const auto g = triangle_graph(GraphMode::Multivariate);
  try {
    fuse_pairwise({g.pairwise[0], g.pairwise[1]});
    FAIL("expected MixedPairs");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MixedPairs);
  }
  CHECK_THROWS_AS(fuse_pairwise({}), Error);
}

TEST_CASE("graph invariants on synthetic systems") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto c = fixtures::synthetic_case(30, 0.5, seed);
    Index currents = 0;
    for (const auto& m : c.measurements) currents += is_voltage(m.kind) ? 0 : 1;

    const auto mv = build_graph(c.model, c.measurements, GraphMode::Multivariate);
    const auto fu = build_graph(c.model, c.measurements, GraphMode::Fusion);
    const auto sc = build_graph(c.model, c.measurements, GraphMode::Scalar);
    CHECK(static_cast<Index>(mv.edges.size()) == 2 * currents);
    CHECK(fu.edges.size() == 2 * fu.pairwise.size());
    CHECK(static_cast<Index>(sc.edges.size()) == 8 * currents);

    std::set<std::pair<Index, Index>> pairs;
    for (const auto& f : fu.pairwise) CHECK(pairs.insert({f.variables[0], f.variables[1]}).second);

    for (const auto* g : {&mv, &fu, &sc}) {
      for (const auto& f : g->pairwise) CHECK(is_spd(f.sigma));
      for (const auto& u : g->unary) CHECK(is_spd(u.lambda));
    }

    const auto a = normal_equations(assemble(mv));
    const auto b = normal_equations(assemble(fu));
    const double scale = Mat(a.gain).cwiseAbs().maxCoeff();
    CHECK(Mat(a.gain - b.gain).cwiseAbs().maxCoeff() <= 1e-10 * scale);
    CHECK((a.rhs - b.rhs).cwiseAbs().maxCoeff() <= 1e-10 * a.rhs.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("covariance models") {
  const auto full = triangle_graph(GraphMode::Multivariate, CovarianceModel::Full);
  const auto diag = triangle_graph(GraphMode::Multivariate, CovarianceModel::Diagonal);
  CHECK(full.unary[0].lambda(0, 1) != 0.0);
  CHECK(diag.unary[0].lambda(0, 1) == 0.0);
  CHECK(full.pairwise[0].sigma(0, 0) == diag.pairwise[0].sigma(0, 0));
}

TEST_CASE("source updates and aging") {
  auto g = triangle_graph(GraphMode::Fusion, CovarianceModel::Full);
  const Index f7 = fixtures::factor_between(g, 0, 1);
  const Mat before = g.pairwise[static_cast<std::size_t>(f7)].sigma;
  const Vec z_before = g.pairwise[static_cast<std::size_t>(f7)].z;
  scale_source_covariance(g, 4, 100.0);
  const auto& f = g.pairwise[static_cast<std::size_t>(f7)];
  CHECK((f.sigma.bottomRightCorner(2, 2) - 100.0 * before.bottomRightCorner(2, 2)).cwiseAbs().maxCoeff() < 1e-18);
  CHECK(f.sigma.topLeftCorner(2, 2) == before.topLeftCorner(2, 2));
  CHECK(f.z == z_before);

  const Mat lambda = g.unary[0].lambda;
  scale_source_covariance(g, 0, 100.0);
  CHECK((g.unary[0].lambda - lambda / 100.0).cwiseAbs().maxCoeff() < 1e-6);

  RectangularPhasor fresh{BusVoltage{0}, Vec2(1.0, 0.0), Mat2::Identity() * 1e-6};
  set_source(g, 0, fresh);
  CHECK(g.unary[0].z == Vec(fresh.z));
  CHECK((g.unary[0].lambda - Mat::Identity(2, 2) * 1e6).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(scale_source_covariance(g, 0, 0.0), Error);
}

TEST_CASE("graph construction errors") {
  const auto model = fixtures::triangle();
  try {
    build_graph(model, {}, GraphMode::Fusion);
    FAIL("expected EmptyMeasurementSet");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyMeasurementSet);
  }
  std::vector<RectangularPhasor> bad{{BusVoltage{9}, Vec2(1.0, 0.0), Mat2::Identity()}};
  try {
    build_graph(model, bad, GraphMode::Fusion);
    FAIL("expected UnknownEndpoint");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownEndpoint);
  }
  CHECK(parse_graph_mode("fusion") == GraphMode::Fusion);
  CHECK(std::string(to_string(GraphMode::Scalar)) == "scalar");
  CHECK_THROWS_AS(parse_graph_mode("vector"), Error);
}

TEST_CASE("voltage-only measurement sets have no pairwise edges") {
  const auto model = fixtures::triangle();
  std::vector<RectangularPhasor> volts;
  for (Index b = 0; b < 3; ++b) volts.push_back({BusVoltage{b}, Vec2(1.0, 0.0), Mat2::Identity() * 1e-6});
  const auto g = build_graph(model, volts, GraphMode::Fusion);
  CHECK(graph_stats(g).pairwise_edges == 0);
  CHECK(graph_stats(g).factor_nodes == 3);
}
