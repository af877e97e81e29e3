#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "pmugbp/io.hpp"

using namespace pmugbp;
namespace fs = std::filesystem;
using io::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / "pmugbp_cli_tests" / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  std::string operator/(const std::string& file) const { return (path / file).string(); }
};

std::string slurp(const std::string& file) {
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& file) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::vector<Vec2> estimates_of(const json& j) {
  std::vector<Vec2> out;
  for (const auto& e : j["estimates"]) out.emplace_back(e["re"].get<double>(), e["im"].get<double>());
  return out;
}

/// Writes the three-bus example network and its six measurements.
void write_example(const TempDir& d) {
  const auto model = fixtures::triangle();
  io::write_json(d / "network.json", io::network_to_json(model));
  io::write_json(d / "measurements.json", io::measurements_to_json(model, fixtures::triangle_phasors()));
}

}  // namespace

TEST_CASE("generate writes a noiseless, reproducible measurement set") {
  TempDir d("generate");
  write_example(d);
  const auto model = fixtures::triangle();
  io::write_json(d / "state.json", io::state_to_json(std::vector<Vec2>{Vec2(1.0, 0.0), Vec2(0.98, -0.02), Vec2(0.97, -0.05)}));
  const std::vector<std::string> args{"--seed", "4", "--out-dir", d / "a", "generate", "--network", d / "network.json",
                                      "--state", d / "state.json", "--pmu-buses", "1", "2",
                                      "--var-vm", "0", "--var-va", "0", "--var-im", "0", "--var-ia", "0"};
  REQUIRE(cli::run(args) == 0);
  const auto phasors = io::read_measurements(model, d / "a/measurements.json");
  CHECK(phasors.size() == 6);
  const auto truth = io::read_state(d / "state.json");
  for (const auto& p : phasors) {
    const auto expected = evaluate_phasor(model, p.kind, truth);
    CHECK(p.z_m == doctest::Approx(std::hypot(expected(0), expected(1))).epsilon(1e-14));
    CHECK(p.var_m == 0.0);
  }
  auto again = args;
  again[3] = d / "b";
  REQUIRE(cli::run(again) == 0);
  CHECK(slurp(d / "a/measurements.json") == slurp(d / "b/measurements.json"));

  const std::vector<std::string> noisy{"--seed", "9", "--out-dir", d / "c", "generate", "--grid-buses", "20",
                                       "--conditions", "3"};
  REQUIRE(cli::run(noisy) == 0);
  CHECK(fs::exists(d / "c/network.json"));
  CHECK(fs::exists(d / "c/conditions/measurements_2.json"));
  auto noisy_again = noisy;
  noisy_again[3] = d / "e";
  REQUIRE(cli::run(noisy_again) == 0);
  CHECK(slurp(d / "c/measurements.json") == slurp(d / "e/measurements.json"));
}

TEST_CASE("solve reproduces the batch estimate and agrees across forms") {
  TempDir d("solve");
  write_example(d);
  const auto base = std::vector<std::string>{"solve", "--network", d / "network.json", "--measurements",
                                             d / "measurements.json", "--covariance", "diagonal"};
  auto with = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> args{"--out-dir", d / out};
    args.insert(args.end(), base.begin(), base.end());
    args.insert(args.end(), extra.begin(), extra.end());
    return cli::run(args);
  };
  REQUIRE(with("fm", {"--mode", "fusion", "--form", "moment"}) == 0);
  REQUIRE(with("fb", {"--mode", "fusion", "--form", "broadcast"}) == 0);
  REQUIRE(with("mv", {"--mode", "multivariate", "--max-iter", "5000", "--tol", "1e-12"}) == 0);
  REQUIRE(with("wls_dir", {}) == 0);

  const auto fm = io::read_json(d / "fm/solve.json");
  CHECK(fm["converged"].get<bool>());
  const auto wls = unstack(solve(assemble(fixtures::triangle(), fixtures::triangle_measurements(), CovarianceModel::Diagonal)));
  CHECK(fixtures::max_abs_diff(estimates_of(fm), wls) < 1e-8);
  // First-round marginal of the third bus.
  bool seen = false;
  for (const auto& row : read_csv(d / "fm/trace.csv")) {
    if (row[0] == "1" && row[1] == "2") {
      seen = true;
      CHECK(std::abs(std::stod(row[2]) - 1.01) <= 0.005);
      CHECK(std::abs(std::stod(row[3]) - 0.00) <= 0.005);
    }
  }
  CHECK(seen);
  CHECK(fixtures::max_abs_diff(estimates_of(io::read_json(d / "mv/solve.json")), estimates_of(fm)) < 1e-8);

  const auto a = read_csv(d / "fm/trace.csv");
  const auto b = read_csv(d / "fb/trace.csv");
  REQUIRE(a.size() == b.size());
  for (std::size_t r = 1; r < a.size(); ++r) {
    for (std::size_t c = 2; c < 4; ++c) CHECK(std::stod(a[r][c]) == doctest::Approx(std::stod(b[r][c])).epsilon(1e-10));
  }

  std::vector<std::string> wls_args{"--out-dir", d / "w", "wls", "--network", d / "network.json",
                                    "--measurements", d / "measurements.json", "--covariance", "diagonal"};
  REQUIRE(cli::run(wls_args) == 0);
  CHECK(fixtures::max_abs_diff(estimates_of(io::read_json(d / "w/wls.json")), wls) < 1e-12);
}

TEST_CASE("manifests replay to identical outputs") {
  TempDir d("replay");
  write_example(d);
  REQUIRE(cli::run({"--out-dir", d / "first", "solve", "--network", d / "network.json", "--measurements",
                    d / "measurements.json", "--form", "broadcast", "--max-iter", "400"}) == 0);
  auto manifest = io::read_json(d / "first/manifest.json");
  CHECK(manifest["command"] == "solve");
  CHECK(manifest["exit_code"] == 0);
  manifest.erase("command");
  manifest.erase("version");
  manifest.erase("exit_code");
  manifest.erase("outputs");
  manifest["out-dir"] = d / "second";
  io::write_json(d / "replay.json", manifest);
  REQUIRE(cli::run({"--config", d / "replay.json", "solve"}) == 0);
  CHECK(slurp(d / "first/solve.json") == slurp(d / "second/solve.json"));
  CHECK(slurp(d / "first/trace.csv") == slurp(d / "second/trace.csv"));
}

TEST_CASE("compare reports ratios that settle at one") {
  TempDir d("compare");
  REQUIRE(cli::run({"--seed", "3", "--out-dir", d.path.string(), "generate", "--grid-buses", "25", "--redundancy", "0.4"}) == 0);
  REQUIRE(cli::run({"--out-dir", d / "cmp", "compare", "--network", d / "network.json", "--measurements",
                    d / "measurements.json", "--truth", d / "state.json", "--modes", "multivariate", "fusion"}) == 0);
  const auto summary = io::read_json(d / "cmp/compare.json");
  for (const char* mode : {"multivariate", "fusion"}) {
    CHECK(summary[mode]["converged"].get<bool>());
    CHECK(!summary[mode]["iterations_to_target"].is_null());
  }
  const auto ratios = read_csv(d / "cmp/rmse_ratio.csv");
  const auto& last = ratios.back();
  CHECK(std::stod(last[2]) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::stod(last[3]) == doctest::Approx(1.0).epsilon(1e-6));

  // Quantiles recompute from the raw per-bus errors.
  const auto raw = read_csv(d / "cmp/ae_raw.csv");
  std::vector<double> mags;
  for (std::size_t r = 1; r < raw.size(); ++r) {
    if (raw[r][0] == "fusion" && raw[r][1] == "1") mags.push_back(std::stod(raw[r][3]));
  }
  REQUIRE(mags.size() == 25);
  const auto stats = box_stats(mags);
  bool found = false;
  for (const auto& row : read_csv(d / "cmp/ae_quantiles.csv")) {
    if (row[0] == "fusion" && row[1] == "1" && row[2] == "magnitude") {
      found = true;
      CHECK(std::stod(row[3]) == doctest::Approx(stats.q25).epsilon(1e-12));
      CHECK(std::stod(row[5]) == doctest::Approx(stats.q75).epsilon(1e-12));
      CHECK(std::stod(row[7]) == doctest::Approx(stats.whisker_hi).epsilon(1e-12));
    }
  }
  CHECK(found);
}

TEST_CASE("compare ranks fusion first on a looped 30-bus grid") {
  TempDir d("ordering");
  REQUIRE(cli::run({"--seed", "1", "--out-dir", d.path.string(), "generate", "--grid-buses", "30", "--grid-degree",
                    "2.7333333333333334", "--redundancy", "0", "--var-vm", "1e-8", "--var-va", "1e-8"}) == 0);
  REQUIRE(cli::run({"--out-dir", d / "cmp", "compare", "--network", d / "network.json", "--measurements",
                    d / "measurements.json", "--truth", d / "state.json", "--covariance", "diagonal"}) == 0);
  const auto summary = io::read_json(d / "cmp/compare.json");
  const int fusion = summary["fusion"]["iterations_to_target"].get<int>();
  for (const char* other : {"multivariate", "scalar"}) {
    const auto& it = summary[other]["iterations_to_target"];
    if (!it.is_null()) CHECK(fusion <= it.get<int>());
  }
}

TEST_CASE("converge reports rho = 0 without feedback and 1 - rho > 0 over a sweep") {
  TempDir d("rho");
  io::write_json(d / "pair.json", io::parse_json(R"({"buses":[{"id":1},{"id":2}],
    "branches":[{"from":1,"to":2,"r":0.01,"x":0.1}]})", "pair"));
  io::write_json(d / "both.json", io::parse_json(R"([
    {"kind":"voltage","bus":1,"z_m":1.0,"z_theta":0.0,"var_m":1e-6,"var_theta":1e-6},
    {"kind":"voltage","bus":2,"z_m":0.98,"z_theta":-0.05,"var_m":1e-6,"var_theta":1e-6},
    {"kind":"current","branch":0,"direction":"from_to","z_m":0.5,"z_theta":-0.3,"var_m":1e-6,"var_theta":1e-6}])", "both"));
  REQUIRE(cli::run({"--out-dir", d / "zero", "converge", "--network", d / "pair.json", "--measurements",
                    d / "both.json", "--method", "dense"}) == 0);
  const auto zero = read_csv(d / "zero/rho.csv");
  REQUIRE(zero.size() == 2);
  CHECK(std::stod(zero[1][4]) == 0.0);

  REQUIRE(cli::run({"--out-dir", d / "sweep", "converge", "--sweep-runs", "100", "--buses-min", "30", "--buses-max",
                    "30"}) == 0);
  const auto sweep = read_csv(d / "sweep/rho.csv");
  REQUIRE(sweep.size() == 101);
  for (std::size_t r = 1; r < sweep.size(); ++r) CHECK(std::stod(sweep[r][5]) > 0.0);
}

TEST_CASE("converge, stream and bench write their tables") {
  TempDir d("analysis");
  write_example(d);
  REQUIRE(cli::run({"--out-dir", d / "rho", "converge", "--network", d / "network.json", "--measurements",
                    d / "measurements.json", "--mode", "multivariate", "--method", "dense"}) == 0);
  const auto rho = read_csv(d / "rho/rho.csv");
  REQUIRE(rho.size() == 2);
  CHECK(std::stod(rho[1][5]) > 0.0);
  CHECK(fs::exists(d / "rho/q_slots.json"));

  REQUIRE(cli::run({"--out-dir", d / "sweep", "converge", "--sweep-runs", "3", "--buses-min", "10", "--buses-max",
                    "20", "--method", "power"}) == 0);
  CHECK(read_csv(d / "sweep/rho.csv").size() == 4);

  REQUIRE(cli::run({"--seed", "2", "--out-dir", d / "gen", "generate", "--grid-buses", "15", "--redundancy", "0.3",
                    "--conditions", "2"}) == 0);
  REQUIRE(cli::run({"--out-dir", d / "st", "stream", "--network", d / "gen/network.json", "--conditions",
                    d / "gen/conditions", "--iterations-per-condition", "4"}) == 0);
  CHECK(read_csv(d / "st/stream.csv").size() == 1 + 2 * 4 * 15);

  REQUIRE(cli::run({"--out-dir", d / "bench", "bench", "--sizes", "1", "12", "--modes", "fusion", "--forms",
                    "canonical", "--iterations", "2", "--repeats", "1"}) == 0);
  const auto bench = read_csv(d / "bench/bench.csv");
  REQUIRE(bench.size() == 3);
  CHECK(std::stod(bench[2][5]) > 0.0);
}

TEST_CASE("exit codes separate input and numerical failures") {
  TempDir d("codes");
  write_example(d);
  CHECK(cli::run({"--out-dir", d / "x", "solve", "--bogus"}) == 2);
  CHECK(cli::run({"--out-dir", d / "x", "solve", "--network", d / "missing.json", "--measurements",
                  d / "measurements.json"}) == 2);
  CHECK(cli::run({"--out-dir", d / "x", "solve", "--network", d / "network.json"}) == 2);
  CHECK(cli::run({"--out-dir", d / "x", "solve", "--network", d / "network.json", "--measurements",
                  d / "measurements.json", "--max-iter", "2"}) == 3);
  CHECK(io::read_json(d / "x/manifest.json")["exit_code"] == 3);
  CHECK(cli::run({"--out-dir", d / "x", "solve", "--network", d / "network.json", "--measurements",
                  d / "measurements.json", "--mode", "tree"}) == 2);

  // Two buses with only one voltage measurement are unobservable.
  io::write_json(d / "pair.json", io::parse_json(R"({"buses":[{"id":1},{"id":2}],
    "branches":[{"from":1,"to":2,"r":0.01,"x":0.1}]})", "pair"));
  io::write_json(d / "one.json", io::parse_json(
      R"([{"kind":"voltage","bus":1,"z_m":1.0,"z_theta":0.0,"var_m":1e-6,"var_theta":1e-6}])", "one"));
  CHECK(cli::run({"--out-dir", d / "x", "wls", "--network", d / "pair.json", "--measurements", d / "one.json"}) == 3);
  CHECK(cli::run({"--out-dir", d / "x", "generate"}) == 2);
}
