#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "json_config.hpp"
#include "pmugbp/convergence.hpp"
#include "pmugbp/io.hpp"
#include "pmugbp/stream.hpp"
#include "pmugbp/wls.hpp"

namespace pmugbp::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Global {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
};

struct Csv {
  std::ostringstream out;
  Csv() { out << std::setprecision(17); }
  template <typename... T>
  void row(const T&... cells) {
    bool first = true;
    ((out << (first ? "" : ",") << cells, first = false), ...);
    out << '\n';
  }
};

struct Outputs {
  fs::path dir;
  std::vector<std::string> written;

  void json_file(const std::string& name, const json& value) {
    io::write_json(dir / name, value);
    written.push_back((dir / name).string());
  }
  void csv_file(const std::string& name, const Csv& csv) {
    io::write_text(dir / name, csv.out.str());
    written.push_back((dir / name).string());
  }
};

double magnitude(const Vec2& x) { return x.norm(); }
double angle(const Vec2& x) { return std::atan2(x(1), x(0)); }

json estimates_json(const BusBranchModel& model, const std::vector<Vec2>& x) {
  json out = json::array();
  for (std::size_t b = 0; b < x.size(); ++b) {
    out.push_back({{"bus", model.buses()[b].label},
                   {"re", x[b](0)},
                   {"im", x[b](1)},
                   {"magnitude", magnitude(x[b])},
                   {"angle", angle(x[b])}});
  }
  return out;
}

std::vector<Index> buses_from_labels(const BusBranchModel& model, const std::vector<Index>& labels) {
  std::vector<Index> out;
  for (Index label : labels) {
    const auto id = model.bus_by_label(label);
    if (!id) throw Error(Errc::UnknownEndpoint, "unknown bus " + std::to_string(label));
    out.push_back(*id);
  }
  return out;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(Errc::InvalidInput, std::string("missing required option ") + flag);
}

CovarianceModel parse_covariance(const std::string& text) {
  if (text == "full") return CovarianceModel::Full;
  if (text == "diagonal") return CovarianceModel::Diagonal;
  throw Error(Errc::InvalidInput, "unknown covariance model '" + text + "'");
}

SpectralMethod parse_method(const std::string& text) {
  if (text == "dense") return SpectralMethod::Dense;
  if (text == "power") return SpectralMethod::Power;
  if (text == "auto") return SpectralMethod::Auto;
  throw Error(Errc::InvalidInput, "unknown spectral method '" + text + "'");
}

// --- generate --------------------------------------------------------------------

struct GenerateOptions {
  std::string network;
  Index grid_buses = 0;
  double grid_degree = 3.0;
  Index grid_ring = 10;
  std::string state;
  std::vector<Index> pmu_buses;
  double redundancy = 0.0;
  MeasurementVariances variances;
  Index conditions = 0;
};

int cmd_generate(const Global& g, const GenerateOptions& o, Outputs& out) {
  BusBranchModel model;
  if (!o.network.empty()) {
    model = io::read_network(o.network);
  } else if (o.grid_buses > 0) {
    GridOptions grid;
    grid.buses = o.grid_buses;
    grid.average_degree = o.grid_degree;
    grid.ring_size = o.grid_ring;
    model = synth_grid(grid, g.seed);
    out.json_file("network.json", io::network_to_json(model));
  } else {
    throw Error(Errc::InvalidInput, "generate needs --network or --grid-buses");
  }

  GroundTruthState state;
  if (!o.state.empty()) {
    state = io::read_state(o.state);
  } else {
    state = synth_state(model, g.seed);
    out.json_file("state.json", io::state_to_json(state));
  }

  PmuConfig pmu;
  if (!o.pmu_buses.empty()) {
    for (Index bus : buses_from_labels(model, o.pmu_buses)) pmu.add(bus);
  } else {
    pmu = place_pmus_greedy(model);
  }
  if (o.redundancy > 0.0) pmu = add_random_pmus(model, pmu, o.redundancy, g.seed);
  json sites = json::array();
  for (const auto& s : pmu.sites) sites.push_back(model.buses()[static_cast<std::size_t>(s.bus)].label);
  out.json_file("pmu.json", sites);

  const auto phasors = generate_measurements(model, state, pmu, o.variances, g.seed);
  out.json_file("measurements.json", io::measurements_to_json(model, phasors));

  if (o.conditions > 0) {
    const auto states = drift_states(state, o.conditions, g.seed);
    for (std::size_t k = 0; k < states.size(); ++k) {
      const auto set = generate_measurements(model, states[k], pmu, o.variances, g.seed + k);
      out.json_file("conditions/state_" + std::to_string(k) + ".json", io::state_to_json(states[k]));
      out.json_file("conditions/measurements_" + std::to_string(k) + ".json", io::measurements_to_json(model, set));
    }
  }
  return 0;
}

// --- solve -----------------------------------------------------------------------

struct SolveOptions {
  std::string network;
  std::string measurements;
  std::string mode = "fusion";
  std::string form = "canonical";
  std::string covariance = "full";
  double tol = 1e-9;
  int max_iterations = 500;
  double rcond = kDefaultRcond;
  double damping = 0.0;
  bool dump_graph = false;
  bool dump_messages = false;
};

SolverConfig solver_config(const SolveOptions& o) {
  SolverConfig c;
  c.form = parse_message_form(o.form);
  c.tol_mean = o.tol;
  c.max_iterations = o.max_iterations;
  c.svd_rcond = o.rcond;
  c.damping = o.damping;
  return c;
}

void write_trace(const FactorGraph& graph, const IterationTrace& trace, Csv& csv) {
  csv.row("iteration", "variable", "mean_re", "mean_im", "max_delta");
  for (const auto& rec : trace) {
    for (const auto& b : rec.beliefs) {
      const auto& v = graph.variables[static_cast<std::size_t>(b.variable)];
      if (v.component == 0) {
        csv.row(rec.iteration, b.variable, b.mean(0), "", rec.max_delta);
      } else if (v.component == 1) {
        csv.row(rec.iteration, b.variable, "", b.mean(0), rec.max_delta);
      } else {
        csv.row(rec.iteration, b.variable, b.mean(0), b.mean(1), rec.max_delta);
      }
    }
  }
}

int cmd_solve(const SolveOptions& o, Outputs& out) {
  require(o.network, "--network");
  require(o.measurements, "--measurements");
  const auto model = io::read_network(o.network);
  const auto meas = to_rectangular(io::read_measurements(model, o.measurements));
  const SolverConfig config = solver_config(o);
  const auto graph = build_graph(model, meas, parse_graph_mode(o.mode), {parse_covariance(o.covariance)});
  if (o.dump_graph) out.json_file("graph.json", io::graph_to_json(graph));

  GbpEngine engine(graph, config, initialize_messages(graph));
  const RunResult result = engine.run();
  if (o.dump_messages) out.json_file("messages.json", io::messages_to_json(engine.graph(), engine.messages()));

  const auto stats = graph_stats(graph);
  out.json_file("solve.json", {{"mode", o.mode},
                               {"form", o.form},
                               {"converged", result.converged},
                               {"iterations", result.iterations},
                               {"graph_stats",
                                {{"variable_nodes", stats.variable_nodes},
                                 {"factor_nodes", stats.factor_nodes},
                                 {"pairwise_edges", stats.pairwise_edges}}},
                               {"estimates", estimates_json(model, bus_estimates(graph, result.beliefs))}});
  Csv csv;
  write_trace(graph, result.trace, csv);
  out.csv_file("trace.csv", csv);
  if (!result.converged) {
    std::cerr << "warning: GBP did not converge within " << config.max_iterations << " iterations\n";
    return 3;
  }
  return 0;
}

// --- wls -------------------------------------------------------------------------

struct WlsOptions {
  std::string network;
  std::string measurements;
  std::string covariance = "full";
};

int cmd_wls(const WlsOptions& o, Outputs& out) {
  require(o.network, "--network");
  require(o.measurements, "--measurements");
  const auto model = io::read_network(o.network);
  const auto meas = to_rectangular(io::read_measurements(model, o.measurements));
  const auto system = assemble(model, meas, parse_covariance(o.covariance));
  const auto obs = observability(system);
  if (!obs.observable) {
    out.json_file("wls.json", {{"observable", false}, {"rank", obs.rank}});
    throw Error(Errc::RankDeficient, "measurement set is not observable (rank " + std::to_string(obs.rank) + ")");
  }
  const auto x = unstack(solve(system));
  out.json_file("wls.json", {{"observable", true}, {"rank", obs.rank}, {"estimates", estimates_json(model, x)}});
  return 0;
}

// --- compare ---------------------------------------------------------------------

struct CompareOptions {
  std::string network;
  std::string measurements;
  std::string truth;
  std::vector<std::string> modes{"scalar", "multivariate", "fusion"};
  std::string form = "canonical";
  std::string covariance = "full";
  int max_iterations = 200;
  double target_ratio = 1.01;
};

int cmd_compare(const CompareOptions& o, Outputs& out) {
  require(o.network, "--network");
  require(o.measurements, "--measurements");
  require(o.truth, "--truth");
  const auto model = io::read_network(o.network);
  const auto meas = to_rectangular(io::read_measurements(model, o.measurements));
  const auto truth = io::read_state(o.truth);
  if (static_cast<Index>(truth.size()) != model.bus_count()) {
    throw Error(Errc::InvalidInput, "truth length does not match bus count");
  }

  Csv ratio_csv, quant_csv, raw_csv;
  ratio_csv.row("mode", "iteration", "ratio_magnitude", "ratio_angle");
  quant_csv.row("mode", "iteration", "quantity", "q25", "q50", "q75", "whisker_lo", "whisker_hi");
  raw_csv.row("mode", "iteration", "bus", "ae_magnitude", "ae_angle");
  json summary = json::object();

  for (const auto& mode_name : o.modes) {
    const auto graph = build_graph(model, meas, parse_graph_mode(mode_name), {parse_covariance(o.covariance)});
    SolverConfig config;
    config.form = parse_message_form(o.form);
    config.max_iterations = o.max_iterations;
    const auto result = run(graph, config, initialize_messages(graph));
    std::vector<std::vector<Vec2>> estimates;
    for (const auto& rec : result.trace) estimates.push_back(bus_estimates(graph, rec.beliefs));
    const auto report = metrics(estimates, unstack(solve(assemble(graph))), truth);

    const Index settled = first_settled(report.rmse_ratio, o.target_ratio);
    for (std::size_t k = 0; k < report.rmse_ratio.size(); ++k) {
      const auto& r = report.rmse_ratio[k];
      const int it = result.trace[k].iteration;
      ratio_csv.row(mode_name, it, r.magnitude, r.angle);
      std::vector<double> mag, ang;
      for (std::size_t b = 0; b < report.ae[k].size(); ++b) {
        mag.push_back(report.ae[k][b].magnitude);
        ang.push_back(report.ae[k][b].angle);
        raw_csv.row(mode_name, it, model.buses()[b].label, report.ae[k][b].magnitude, report.ae[k][b].angle);
      }
      for (const auto& [name, values] : {std::pair{"magnitude", &mag}, std::pair{"angle", &ang}}) {
        const auto s = box_stats(*values);
        quant_csv.row(mode_name, it, name, s.q25, s.q50, s.q75, s.whisker_lo, s.whisker_hi);
      }
    }
    summary[mode_name] = {{"converged", result.converged},
                          {"iterations", result.iterations},
                          {"iterations_to_target",
                           settled < 0 ? json(nullptr) : json(result.trace[static_cast<std::size_t>(settled)].iteration)},
                          {"wls_rmse", {{"magnitude", report.wls_rmse.magnitude}, {"angle", report.wls_rmse.angle}}}};
  }
  out.csv_file("rmse_ratio.csv", ratio_csv);
  out.csv_file("ae_quantiles.csv", quant_csv);
  out.csv_file("ae_raw.csv", raw_csv);
  out.json_file("compare.json", summary);
  return 0;
}

// --- converge --------------------------------------------------------------------

struct ConvergeOptions {
  std::string network;
  std::string measurements;
  std::string mode = "fusion";
  std::string method = "auto";
  int sweep_runs = 0;
  Index buses_min = 30;
  Index buses_max = 200;
  double p_min = 0.2;
  double p_max = 0.8;
  double var_v_min = 1e-8;
  double var_v_max = 1e-6;
  double var_i = 1e-6;
};

struct RhoRow {
  SpectralReport report;
  ConvergenceSystem system;
};

RhoRow analyze(const BusBranchModel& model, const std::vector<RectangularPhasor>& meas, GraphMode mode,
               SpectralMethod method) {
  const auto graph = build_graph(model, meas, mode);
  const auto fp = iterate_precision_fixed_point(graph, initialize_messages(graph));
  RhoRow row;
  row.system = assemble_mean_recursion(graph, fp);
  row.report = spectral_radius(row.system, method);
  return row;
}

int cmd_converge(const Global& g, const ConvergeOptions& o, Outputs& out) {
  const GraphMode mode = parse_graph_mode(o.mode);
  const SpectralMethod method = parse_method(o.method);
  Csv csv;
  csv.row("run", "buses", "p", "var_v", "rho", "one_minus_rho", "method");

  if (o.sweep_runs <= 0) {
    require(o.network, "--network");
    require(o.measurements, "--measurements");
    const auto model = io::read_network(o.network);
    const auto meas = to_rectangular(io::read_measurements(model, o.measurements));
    const auto row = analyze(model, meas, mode, method);
    csv.row(0, model.bus_count(), "", "", row.report.rho, row.report.one_minus_rho, to_string(row.report.method));
    json slots = json::array();
    for (const auto& s : row.system.slots) {
      slots.push_back({{"slot", s.edge}, {"variable", s.variable}, {"factor", s.factor}});
    }
    out.json_file("q_slots.json", slots);
    out.csv_file("rho.csv", csv);
    return 0;
  }

  if (o.buses_min < 1 || o.buses_max < o.buses_min) throw Error(Errc::InvalidInput, "invalid bus range");
  std::mt19937_64 rng(g.seed);
  std::uniform_int_distribution<Index> buses(o.buses_min, o.buses_max);
  std::uniform_real_distribution<double> p(o.p_min, o.p_max);
  std::uniform_real_distribution<double> log_var(std::log10(o.var_v_min), std::log10(o.var_v_max));
  int failures = 0;
  for (int run_id = 0; run_id < o.sweep_runs; ++run_id) {
    const std::uint64_t seed = g.seed + static_cast<std::uint64_t>(run_id);
    GridOptions grid;
    grid.buses = buses(rng);
    const double redundancy = p(rng);
    const double var_v = std::pow(10.0, log_var(rng));
    const auto model = synth_grid(grid, seed);
    const auto pmu = add_random_pmus(model, place_pmus_greedy(model), redundancy, seed);
    const MeasurementVariances vars{var_v, var_v, o.var_i, o.var_i};
    const auto meas = to_rectangular(generate_measurements(model, synth_state(model, seed), pmu, vars, seed));
    const auto row = analyze(model, meas, mode, method);
    if (!(row.report.one_minus_rho > 0.0)) ++failures;
    csv.row(run_id, grid.buses, redundancy, var_v, row.report.rho, row.report.one_minus_rho,
            to_string(row.report.method));
  }
  out.csv_file("rho.csv", csv);
  if (failures > 0) std::cerr << failures << " of " << o.sweep_runs << " runs have rho(Q) >= 1\n";
  return 0;
}

// --- stream ----------------------------------------------------------------------

struct StreamOptions {
  std::string network;
  std::string conditions;
  double fraction = 0.6;
  double aging = 1e2;
  int iterations_per_condition = 9;
  std::string mode = "fusion";
  std::string form = "canonical";
};

int cmd_stream(const Global& g, const StreamOptions& o, Outputs& out) {
  require(o.network, "--network");
  require(o.conditions, "--conditions");
  const auto model = io::read_network(o.network);
  ConditionSchedule schedule;
  for (std::size_t k = 0;; ++k) {
    const fs::path state = fs::path(o.conditions) / ("state_" + std::to_string(k) + ".json");
    const fs::path meas = fs::path(o.conditions) / ("measurements_" + std::to_string(k) + ".json");
    if (!fs::exists(state) || !fs::exists(meas)) break;
    schedule.push_back({io::read_state(state), to_rectangular(io::read_measurements(model, meas))});
  }
  if (schedule.empty()) throw Error(Errc::InvalidInput, "no state_0.json/measurements_0.json in " + o.conditions);

  StreamConfig config;
  config.update_fraction = o.fraction;
  config.aging_factor = o.aging;
  config.iterations_per_condition = o.iterations_per_condition;
  config.seed = g.seed;
  config.mode = parse_graph_mode(o.mode);
  config.solver.form = parse_message_form(o.form);
  const auto trace = run_stream(model, schedule, config);

  Csv csv;
  csv.row("step", "condition", "bus", "V_mag", "V_angle", "truth_mag", "truth_angle");
  for (const auto& s : trace.steps) {
    const auto& truth = trace.truths[static_cast<std::size_t>(s.condition)];
    for (std::size_t b = 0; b < s.estimate.size(); ++b) {
      csv.row(s.step, s.condition, model.buses()[b].label, magnitude(s.estimate[b]), angle(s.estimate[b]),
              magnitude(truth[b]), angle(truth[b]));
    }
  }
  out.csv_file("stream.csv", csv);
  return 0;
}

// --- bench -----------------------------------------------------------------------

struct BenchOptions {
  std::vector<Index> sizes{100, 200, 400, 800, 1600, 3200};
  double degree = 3.0;
  double redundancy = 0.2;
  std::vector<std::string> modes{"fusion"};
  std::vector<std::string> forms{"canonical", "broadcast"};
  int iterations = 10;
  int repeats = 3;
};

int cmd_bench(const Global& g, const BenchOptions& o, Outputs& out) {
  if (o.iterations < 1 || o.repeats < 1) throw Error(Errc::InvalidInput, "iterations and repeats must be positive");
  Csv csv;
  csv.row("buses", "degree", "mode", "form", "iterations", "seconds_per_iteration");
  for (Index n : o.sizes) {
    GridOptions grid;
    grid.buses = n;
    grid.average_degree = o.degree;
    const auto model = synth_grid(grid, g.seed);
    const auto pmu = add_random_pmus(model, place_pmus_greedy(model), o.redundancy, g.seed);
    const auto meas = to_rectangular(generate_measurements(model, synth_state(model, g.seed), pmu, {}, g.seed));
    for (const auto& mode : o.modes) {
      const auto graph = build_graph(model, meas, parse_graph_mode(mode));
      for (const auto& form : o.forms) {
        SolverConfig config;
        config.form = parse_message_form(form);
        config.record_trace = false;
        const double t = time_iterations(graph, config, o.iterations, o.repeats);
        csv.row(n, o.degree, mode, form, o.iterations, t);
      }
    }
  }
  out.csv_file("bench.csv", csv);
  return 0;
}

}  // namespace

double time_iterations(const FactorGraph& graph, const SolverConfig& config, int iterations, int repeats) {
  const MessageStore initial = initialize_messages(graph);
  SolverConfig c = config;
  c.record_trace = false;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < repeats; ++r) {
    GbpEngine engine(graph, c, initial);
    const auto start = std::chrono::steady_clock::now();
    for (int k = 0; k < iterations; ++k) engine.step();
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    best = std::min(best, elapsed.count() / iterations);
  }
  return best;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Distributed PMU state estimation with Gaussian belief propagation", "pmugbp"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values (nested objects per command)");
  app.require_subcommand(1);

  Global global;
  app.add_option("--seed", global.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", global.out_dir, "Output directory")->capture_default_str();

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Synthesize a state and PMU measurements");
  generate->add_option("--network", gen.network, "Network JSON file");
  generate->add_option("--grid-buses", gen.grid_buses, "Synthesize a ring-of-rings grid with this many buses");
  generate->add_option("--grid-degree", gen.grid_degree, "Average bus degree of the synthetic grid")->capture_default_str();
  generate->add_option("--grid-ring", gen.grid_ring, "Ring size of the synthetic grid")->capture_default_str();
  generate->add_option("--state", gen.state, "State JSON file (synthesized when absent)");
  generate->add_option("--pmu-buses", gen.pmu_buses, "Bus ids carrying a PMU (greedy placement when absent)");
  generate->add_option("--redundancy", gen.redundancy, "Probability of an extra PMU at each remaining bus")->capture_default_str();
  generate->add_option("--var-vm", gen.variances.voltage_m, "Voltage magnitude variance")->capture_default_str();
  generate->add_option("--var-va", gen.variances.voltage_theta, "Voltage angle variance")->capture_default_str();
  generate->add_option("--var-im", gen.variances.current_m, "Current magnitude variance")->capture_default_str();
  generate->add_option("--var-ia", gen.variances.current_theta, "Current angle variance")->capture_default_str();
  generate->add_option("--conditions", gen.conditions, "Also write this many drifting operating conditions")->capture_default_str();

  SolveOptions sol;
  auto* solve_cmd = app.add_subcommand("solve", "Run GBP on a measurement set");
  solve_cmd->add_option("--network", sol.network, "Network JSON file");
  solve_cmd->add_option("--measurements", sol.measurements, "Measurement JSON file");
  solve_cmd->add_option("--mode", sol.mode, "scalar | multivariate | fusion")->capture_default_str();
  solve_cmd->add_option("--form", sol.form, "moment | canonical | broadcast")->capture_default_str();
  solve_cmd->add_option("--covariance", sol.covariance, "full | diagonal")->capture_default_str();
  solve_cmd->add_option("--tol", sol.tol, "Stop when beliefs move less than this")->capture_default_str();
  solve_cmd->add_option("--max-iter", sol.max_iterations, "Iteration limit")->capture_default_str();
  solve_cmd->add_option("--rcond", sol.rcond, "Relative singular value cutoff")->capture_default_str();
  solve_cmd->add_option("--damping", sol.damping, "Weight of the previous factor messages")->capture_default_str();
  solve_cmd->add_flag("--dump-graph", sol.dump_graph, "Write graph.json");
  solve_cmd->add_flag("--dump-messages", sol.dump_messages, "Write messages.json");

  WlsOptions wls_opt;
  auto* wls_cmd = app.add_subcommand("wls", "Centralized weighted least squares");
  wls_cmd->add_option("--network", wls_opt.network, "Network JSON file");
  wls_cmd->add_option("--measurements", wls_opt.measurements, "Measurement JSON file");
  wls_cmd->add_option("--covariance", wls_opt.covariance, "full | diagonal")->capture_default_str();

  CompareOptions cmp;
  auto* compare = app.add_subcommand("compare", "RMSE ratio and AE quantiles per iteration");
  compare->add_option("--network", cmp.network, "Network JSON file");
  compare->add_option("--measurements", cmp.measurements, "Measurement JSON file");
  compare->add_option("--truth", cmp.truth, "True state JSON file");
  compare->add_option("--modes", cmp.modes, "Graph modes to compare")->capture_default_str();
  compare->add_option("--form", cmp.form, "moment | canonical | broadcast")->capture_default_str();
  compare->add_option("--covariance", cmp.covariance, "full | diagonal")->capture_default_str();
  compare->add_option("--max-iter", cmp.max_iterations, "Iteration limit")->capture_default_str();
  compare->add_option("--target-ratio", cmp.target_ratio, "RMSE ratio bound that must hold to the end of the run")->capture_default_str();

  ConvergeOptions conv;
  auto* converge = app.add_subcommand("converge", "Spectral radius of the mean recursion");
  converge->add_option("--network", conv.network, "Network JSON file");
  converge->add_option("--measurements", conv.measurements, "Measurement JSON file");
  converge->add_option("--mode", conv.mode, "multivariate | fusion")->capture_default_str();
  converge->add_option("--method", conv.method, "dense | power | auto")->capture_default_str();
  converge->add_option("--sweep-runs", conv.sweep_runs, "Number of synthetic runs (0 analyses the given files)")->capture_default_str();
  converge->add_option("--buses-min", conv.buses_min, "Smallest synthetic grid")->capture_default_str();
  converge->add_option("--buses-max", conv.buses_max, "Largest synthetic grid")->capture_default_str();
  converge->add_option("--p-min", conv.p_min, "Lowest PMU redundancy")->capture_default_str();
  converge->add_option("--p-max", conv.p_max, "Highest PMU redundancy")->capture_default_str();
  converge->add_option("--var-v-min", conv.var_v_min, "Lowest voltage variance")->capture_default_str();
  converge->add_option("--var-v-max", conv.var_v_max, "Highest voltage variance")->capture_default_str();
  converge->add_option("--var-i", conv.var_i, "Current variance")->capture_default_str();

  StreamOptions str;
  auto* stream_cmd = app.add_subcommand("stream", "Asynchronous measurement stream");
  stream_cmd->add_option("--network", str.network, "Network JSON file");
  stream_cmd->add_option("--conditions", str.conditions, "Directory with state_<k>.json and measurements_<k>.json");
  stream_cmd->add_option("--fraction", str.fraction, "Share of measurements refreshed per step")->capture_default_str();
  stream_cmd->add_option("--aging", str.aging, "Covariance growth of stale measurements per step")->capture_default_str();
  stream_cmd->add_option("--iterations-per-condition", str.iterations_per_condition, "Steps per condition")->capture_default_str();
  stream_cmd->add_option("--mode", str.mode, "multivariate | fusion")->capture_default_str();
  stream_cmd->add_option("--form", str.form, "moment | canonical | broadcast")->capture_default_str();

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Per-iteration timing on synthetic grids");
  bench_cmd->add_option("--sizes", bench.sizes, "Bus counts")->capture_default_str();
  bench_cmd->add_option("--degree", bench.degree, "Average bus degree")->capture_default_str();
  bench_cmd->add_option("--redundancy", bench.redundancy, "Extra PMU probability")->capture_default_str();
  bench_cmd->add_option("--modes", bench.modes, "Graph modes")->capture_default_str();
  bench_cmd->add_option("--forms", bench.forms, "Message forms")->capture_default_str();
  bench_cmd->add_option("--iterations", bench.iterations, "Iterations per timing")->capture_default_str();
  bench_cmd->add_option("--repeats", bench.repeats, "Timings per case (minimum kept)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Outputs out;
  out.dir = global.out_dir;
  const CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  int code = 0;
  try {
    if (name == "generate") code = cmd_generate(global, gen, out);
    else if (name == "solve") code = cmd_solve(sol, out);
    else if (name == "wls") code = cmd_wls(wls_opt, out);
    else if (name == "compare") code = cmd_compare(cmp, out);
    else if (name == "converge") code = cmd_converge(global, conv, out);
    else if (name == "stream") code = cmd_stream(global, str, out);
    else if (name == "bench") code = cmd_bench(global, bench, out);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    code = is_input_error(e.code()) ? 2 : 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = 2;
  }

  json manifest = JsonConfig::collect(&app, true);
  manifest["command"] = name;
  manifest["version"] = kVersion;
  manifest["exit_code"] = code;
  manifest["outputs"] = out.written;
  try {
    io::write_json(out.dir / "manifest.json", manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write manifest: " << e.what() << '\n';
    if (code == 0) code = 2;
  }
  return code;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("pmugbp");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pmugbp::cli
