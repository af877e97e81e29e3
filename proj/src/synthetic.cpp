#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "pmugbp/power_model.hpp"

namespace pmugbp {

GroundTruthState synth_state(const BusBranchModel& model, std::uint64_t seed, const StateSpread& spread) {
  if (spread.magnitude_lo > spread.magnitude_hi || spread.angle_lo > spread.angle_hi) {
    throw Error(Errc::InvalidInput, "state spread bounds are inverted");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GroundTruthState state;
  state.reserve(static_cast<std::size_t>(model.bus_count()));
  for (Index i = 0; i < model.bus_count(); ++i) {
    const double mag = spread.magnitude_lo + (spread.magnitude_hi - spread.magnitude_lo) * u(rng);
    const double ang = spread.angle_lo + (spread.angle_hi - spread.angle_lo) * u(rng);
    state.emplace_back(mag * std::cos(ang), mag * std::sin(ang));
  }
  return state;
}

BusBranchModel synth_grid(const GridOptions& options, std::uint64_t seed) {
  const Index n = options.buses;
  if (n < 1) throw Error(Errc::InvalidInput, "grid needs at least one bus");
  if (options.ring_size < 1) throw Error(Errc::InvalidInput, "ring size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<Bus> buses;
  for (Index i = 0; i < n; ++i) buses.push_back(Bus{i, i, 230.0});

  std::set<std::pair<Index, Index>> used;
  std::vector<std::pair<Index, Index>> edges;
  auto connect = [&](Index a, Index b) {
    if (a == b) return false;
    const auto key = std::minmax(a, b);
    if (!used.insert(key).second) return false;
    edges.emplace_back(a, b);
    return true;
  };

  const Index s = options.ring_size;
  const Index rings = (n + s - 1) / s;
  auto ring_begin = [&](Index k) { return k * s; };
  auto ring_len = [&](Index k) { return std::min(s, n - k * s); };

  for (Index k = 0; k < rings; ++k) {
    const Index b0 = ring_begin(k);
    const Index len = ring_len(k);
    for (Index j = 0; j + 1 < len; ++j) connect(b0 + j, b0 + j + 1);
    if (len >= 3) connect(b0 + len - 1, b0);
  }
  for (Index k = 0; k + 1 < rings; ++k) connect(ring_begin(k), ring_begin(k + 1));

  const auto target = static_cast<std::size_t>(std::llround(options.average_degree * static_cast<double>(n) / 2.0));
  const auto max_edges = static_cast<std::size_t>(n * (n - 1) / 2);
  const std::size_t goal = std::min(target, max_edges);

  // Ladder rungs between neighbouring rings (the last ring closes onto the first).
  if (rings >= 2) {
    for (Index j = 2; j < s && edges.size() < goal; j += 2) {
      for (Index k = 0; k < rings && edges.size() < goal; ++k) {
        const Index next = (k + 1) % rings;
        if (j < ring_len(k) && j < ring_len(next)) connect(ring_begin(k) + j, ring_begin(next) + j);
      }
    }
  }
  std::uniform_int_distribution<Index> pick(0, n - 1);
  while (edges.size() < goal) connect(pick(rng), pick(rng));

  std::vector<Branch> branches;
  branches.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    const double r = 0.01 + 0.04 * u(rng);
    const double x = r * (3.0 + 5.0 * u(rng));
    const double b_s = 0.02 * u(rng);
    double tau = 1.0;
    double phi = 0.0;
    if (u(rng) < options.transformer_fraction) {
      tau = 0.95 + 0.1 * u(rng);
      if (u(rng) < 0.5) phi = -0.1 + 0.2 * u(rng);
    }
    branches.push_back(Branch::from_impedance(a, b, r, x, 0.0, b_s, tau, phi));
  }
  return BusBranchModel(std::move(buses), std::move(branches));
}

}  // namespace pmugbp
