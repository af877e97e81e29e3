#include "doctest.h"

#include "fixtures.hpp"

using namespace pmugbp;

namespace {

std::vector<Vec2> wls_of(const FactorGraph& g) { return unstack(solve(assemble(g))); }

SolverConfig config_for(MessageForm form) {
  SolverConfig c;
  c.form = form;
  return c;
}

MessageStore initial_for(const FactorGraph& g, MessageForm form) {
  return initialize_messages(g).encoded(form != MessageForm::Moment);
}

}  // namespace

TEST_CASE("initial messages follow the unary factors") {
  const auto g = fixtures::triangle_graph(GraphMode::Multivariate);
  const auto store = initialize_messages(g);
  const auto& f1 = g.unary[0];
  for (Index e : g.variables[0].edges) {
    const auto m = store.to_factor(e);
    CHECK(m.mean == f1.z);
    CHECK(m.precision == f1.lambda);
  }
  for (Index e : g.variables[2].edges) {
    const auto m = store.to_factor(e);
    CHECK(m.mean == Vec(Vec2(1.0, 0.0)));
    CHECK(m.precision == Mat(Mat2::Identity() * 1e-8));
  }
  for (Index e = 0; e < store.edge_count(); ++e) CHECK(store.to_variable(e).precision.isZero(0));

  std::vector<RectangularPhasor> meas = fixtures::triangle_measurements();
  meas.push_back({BusVoltage{2}, Vec2(1.0, -0.05), Mat2::Identity() * 1e-6});
  const auto full = build_graph(fixtures::triangle(), meas, GraphMode::Fusion);
  const auto s2 = initialize_messages(full);
  for (Index e = 0; e < s2.edge_count(); ++e) CHECK(s2.to_factor(e).precision(0, 0) > 1.0);
}

TEST_CASE("example fusion run recovers the WLS estimate") {
  const auto g = fixtures::triangle_graph(GraphMode::Fusion);
  const auto r = run(g, config_for(MessageForm::Canonical), initialize_messages(g).encoded(true));
  CHECK(r.converged);
  CHECK(fixtures::max_abs_diff(bus_estimates(g, r.beliefs), wls_of(g)) < 1e-6);
}

TEST_CASE("belief propagation is exact on a tree") {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  for (Index b = 0; b < 6; ++b) buses.push_back({b, b + 1, 1.0});
  for (Index b = 0; b + 1 < 6; ++b) branches.push_back(Branch::from_impedance(b, b + 1, 0.02, 0.1 + 0.01 * b));
  const BusBranchModel model(buses, branches);
  const auto truth = synth_state(model, 3);
  std::vector<PhasorKind> kinds;
  for (Index b = 0; b < 6; b += 2) kinds.push_back(BusVoltage{b});
  for (Index k = 0; k < 5; ++k) kinds.push_back(BranchCurrent{k, Direction::FromTo});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 1e-3);
  std::vector<RectangularPhasor> meas;
  for (const auto& kind : kinds) {
    meas.push_back({kind, evaluate_phasor(model, kind, truth) + Vec2(noise(rng), noise(rng)), Mat2::Identity() * 1e-6});
  }
  const auto g = build_graph(model, meas, GraphMode::Fusion);
  const int diameter = 5;
  SolverConfig c;
  c.max_iterations = diameter + 1;
  c.tol_mean = 1e-300;
  const auto r = run(g, c, initialize_messages(g).encoded(true));
  const auto est = bus_estimates(g, r.trace.back().beliefs);
  CHECK(fixtures::max_abs_diff(est, wls_of(g)) < 1e-9);
}

TEST_CASE("message forms agree edge by edge every iteration") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto c = fixtures::synthetic_case(25, 0.4, seed);
    for (auto mode : {GraphMode::Scalar, GraphMode::Multivariate, GraphMode::Fusion}) {
      const auto g = build_graph(c.model, c.measurements, mode);
      GbpEngine moment(g, config_for(MessageForm::Moment), initial_for(g, MessageForm::Moment));
      GbpEngine canonical(g, config_for(MessageForm::Canonical), initial_for(g, MessageForm::Canonical));
      GbpEngine broadcast(g, config_for(MessageForm::Broadcast), initial_for(g, MessageForm::Broadcast));
      double gap = 0.0;
      for (int it = 0; it < 15; ++it) {
        moment.step();
        canonical.step();
        broadcast.step();
        gap = std::max(gap, fixtures::store_gap(moment.messages(), canonical.messages()));
        gap = std::max(gap, fixtures::store_gap(moment.messages(), broadcast.messages()));
      }
      CHECK(gap <= 1e-10);
    }
  }
}

TEST_CASE("converged beliefs equal the WLS solution") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto c = fixtures::synthetic_case(30, 0.5, seed);
    for (auto mode : {GraphMode::Multivariate, GraphMode::Fusion}) {
      const auto g = build_graph(c.model, c.measurements, mode);
      const auto r = run(g, config_for(MessageForm::Canonical), initial_for(g, MessageForm::Canonical));
      REQUIRE(r.converged);
      CHECK(fixtures::max_abs_diff(bus_estimates(g, r.beliefs), wls_of(g)) < 1e-8);
    }
  }
}

TEST_CASE("scalar graphs converge to the diagonal WLS solution") {
  const auto c = fixtures::synthetic_case(20, 0.6, 2);
  const auto g = build_graph(c.model, c.measurements, GraphMode::Scalar);
  SolverConfig cfg;
  cfg.max_iterations = 2000;
  const auto r = run(g, cfg, initialize_messages(g).encoded(true));
  REQUIRE(r.converged);
  const auto diag = unstack(solve(assemble(c.model, c.measurements, CovarianceModel::Diagonal)));
  CHECK(fixtures::max_abs_diff(bus_estimates(g, r.beliefs), diag) < 1e-8);
}

TEST_CASE("message precisions stay symmetric and positive semidefinite") {
  const auto c = fixtures::synthetic_case(30, 0.3, 5);
  const auto g = build_graph(c.model, c.measurements, GraphMode::Fusion);
  GbpEngine e(g, config_for(MessageForm::Moment), initialize_messages(g));
  for (int it = 0; it < 10; ++it) {
    e.step();
    for (Index k = 0; k < e.messages().edge_count(); ++k) {
      for (const Mat& p : {e.messages().to_variable(k).precision, e.messages().to_factor(k).precision}) {
        CHECK((p - p.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff()));
        CHECK(min_eigenvalue(p) >= -1e-10 * std::max(1.0, p.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST_CASE("runs are bit-for-bit deterministic and leave unary factors untouched") {
  const auto c = fixtures::synthetic_case(25, 0.5, 6);
  const auto g = build_graph(c.model, c.measurements, GraphMode::Fusion);
  const auto a = run(g, config_for(MessageForm::Canonical), initial_for(g, MessageForm::Canonical));
  const auto b = run(g, config_for(MessageForm::Canonical), initial_for(g, MessageForm::Canonical));
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    for (std::size_t v = 0; v < a.trace[k].beliefs.size(); ++v) {
      CHECK(a.trace[k].beliefs[v].mean == b.trace[k].beliefs[v].mean);
    }
  }
  GbpEngine e(g, config_for(MessageForm::Canonical), initial_for(g, MessageForm::Canonical));
  e.run();
  for (std::size_t u = 0; u < g.unary.size(); ++u) {
    CHECK(e.graph().unary[u].z == g.unary[u].z);
    CHECK(e.graph().unary[u].lambda == g.unary[u].lambda);
  }
}

TEST_CASE("trace records one entry per iteration with the stopping delta") {
  const auto g = fixtures::triangle_graph(GraphMode::Fusion);
  SolverConfig cfg;
  cfg.max_iterations = 3;
  const auto r = run(g, cfg, initialize_messages(g).encoded(true));
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
  REQUIRE(r.trace.size() == 3);
  CHECK(std::isinf(r.trace[0].max_delta));
  CHECK(r.trace[2].iteration == 3);
  CHECK(r.trace[2].max_delta > 0.0);

  cfg.record_trace = false;
  CHECK(run(g, cfg, initialize_messages(g).encoded(true)).trace.empty());
}

TEST_CASE("damping keeps the fixed point") {
  const auto c = fixtures::synthetic_case(30, 0.4, 3);
  const auto g = build_graph(c.model, c.measurements, GraphMode::Fusion);
  for (auto form : {MessageForm::Moment, MessageForm::Canonical, MessageForm::Broadcast}) {
    SolverConfig cfg = config_for(form);
    cfg.damping = 0.3;
    cfg.max_iterations = 2000;
    const auto r = run(g, cfg, initial_for(g, form));
    REQUIRE(r.converged);
    CHECK(fixtures::max_abs_diff(bus_estimates(g, r.beliefs), wls_of(g)) < 1e-8);
  }
}

TEST_CASE("solver configuration is validated") {
  const auto g = fixtures::triangle_graph(GraphMode::Fusion);
  SolverConfig c;
  c.max_iterations = 0;
  CHECK_THROWS_AS(GbpEngine(g, c, initialize_messages(g)), Error);
  c = {};
  c.damping = 1.0;
  CHECK_THROWS_AS(GbpEngine(g, c, initialize_messages(g)), Error);
  c = {};
  c.tol_mean = 0.0;
  CHECK_THROWS_AS(GbpEngine(g, c, initialize_messages(g)), Error);
  CHECK(parse_message_form("broadcast") == MessageForm::Broadcast);
  CHECK_THROWS_AS(parse_message_form("information"), Error);
}

TEST_CASE("refreshing a variable rewrites only its outgoing messages") {
  auto g = fixtures::triangle_graph(GraphMode::Fusion);
  GbpEngine e(g, config_for(MessageForm::Canonical), initial_for(g, MessageForm::Canonical));
  e.step();
  const MessageStore before = e.messages();
  set_source(e.graph(), 0, {BusVoltage{0}, Vec2(1.2, 0.0), Mat2::Identity() * 1e-6});
  e.refresh_outgoing(0);
  for (Index k = 0; k < before.edge_count(); ++k) {
    const bool own = g.edges[static_cast<std::size_t>(k)].variable == 0;
    const double gap = fixtures::message_gap(before.to_factor(k), e.messages().to_factor(k));
    if (own) {
      CHECK(gap > 1e-3);
    } else {
      CHECK(gap == 0.0);
    }
  }
}

TEST_CASE("bus estimates from scalar and vector graphs") {
  const auto gs = fixtures::triangle_graph(GraphMode::Scalar);
  std::vector<Belief> beliefs;
  for (const auto& v : gs.variables) beliefs.push_back({v.id, Vec::Constant(1, 0.1 * v.id), Mat::Identity(1, 1)});
  const auto est = bus_estimates(gs, beliefs);
  REQUIRE(est.size() == 3);
  CHECK(est[1](0) == doctest::Approx(0.2));
  CHECK(est[1](1) == doctest::Approx(0.3));
  CHECK_THROWS_AS(bus_estimates(gs, {}), Error);
}

TEST_CASE("example broadcast trace equals the canonical trace") {
  for (auto mode : {GraphMode::Multivariate, GraphMode::Fusion}) {
    const auto g = fixtures::triangle_graph(mode);
    auto cfg = config_for(MessageForm::Canonical);
    cfg.max_iterations = 60;
    const auto a = run(g, cfg, initial_for(g, MessageForm::Canonical));
    cfg.form = MessageForm::Broadcast;
    const auto b = run(g, cfg, initial_for(g, MessageForm::Broadcast));
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
      for (std::size_t v = 0; v < a.trace[k].beliefs.size(); ++v) {
        const auto& x = a.trace[k].beliefs[v];
        const auto& y = b.trace[k].beliefs[v];
        CHECK((x.mean - y.mean).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((x.precision - y.precision).cwiseAbs().maxCoeff() <= 1e-12 * x.precision.cwiseAbs().maxCoeff());
      }
    }
  }
}

TEST_CASE("fusion settles no later than multivariate, which settles no later than scalar") {
  // 41 branches on 30 buses, placement without redundancy, accurate voltages.
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto c = fixtures::synthetic_case(30, 0.0, seed, {1e-8, 1e-8, 1e-6, 1e-6}, 82.0 / 30.0);
    std::vector<Index> settled;
    for (auto mode : {GraphMode::Fusion, GraphMode::Multivariate, GraphMode::Scalar}) {
      const auto g = build_graph(c.model, c.measurements, mode, {CovarianceModel::Diagonal});
      auto cfg = config_for(MessageForm::Canonical);
      cfg.max_iterations = 200;
      const auto r = run(g, cfg, initial_for(g, MessageForm::Canonical));
      std::vector<std::vector<Vec2>> est;
      for (const auto& rec : r.trace) est.push_back(bus_estimates(g, rec.beliefs));
      const Index k = first_settled(metrics(est, wls_of(g), c.truth).rmse_ratio, 1.01);
      REQUIRE(k >= 0);
      settled.push_back(r.trace[static_cast<std::size_t>(k)].iteration);
    }
    CHECK(settled[0] <= settled[1]);
    CHECK(settled[1] <= settled[2]);
    CHECK(settled[0] <= 7);
  }
}
