#include <algorithm>
#include <random>

#include "pmugbp/power_model.hpp"

namespace pmugbp {

namespace {

Index other_end(const Branch& br, Index bus) { return br.from == bus ? br.to : br.from; }

}  // namespace

// With the default channel set a PMU at bus b determines x_b (voltage
// channel) and every neighbour x_j (current channel, H_j invertible because
// every branch has nonzero series admittance). Buses outside the closed
// neighbourhood of all PMUs have empty columns in H. Hence
// rank(H) = 2 * |covered buses| and the rank gain of a candidate is twice the
// number of buses it newly covers.
PmuConfig place_pmus_greedy(const BusBranchModel& model) {
  const Index n = model.bus_count();
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  Index covered_count = 0;
  PmuConfig config;

  auto gain_of = [&](Index bus) {
    Index gain = covered[static_cast<std::size_t>(bus)] ? 0 : 1;
    std::vector<Index> seen;
    for (Index k : model.incident(bus)) {
      const Index j = other_end(model.branch(k), bus);
      if (covered[static_cast<std::size_t>(j)]) continue;
      if (std::find(seen.begin(), seen.end(), j) != seen.end()) continue;  // parallel branches
      seen.push_back(j);
      ++gain;
    }
    return 2 * gain;
  };

  while (covered_count < n) {
    Index best = -1;
    Index best_gain = 0;
    for (Index bus = 0; bus < n; ++bus) {
      if (config.has_pmu(bus)) continue;
      const Index gain = gain_of(bus);
      if (gain > best_gain) {
        best = bus;
        best_gain = gain;
      }
    }
    if (best < 0) throw Error(Errc::Unobservable, "no PMU candidate increases the rank of H");
    config.add(best);
    auto cover = [&](Index bus) {
      if (!covered[static_cast<std::size_t>(bus)]) {
        covered[static_cast<std::size_t>(bus)] = true;
        ++covered_count;
      }
    };
    cover(best);
    for (Index k : model.incident(best)) cover(other_end(model.branch(k), best));
  }
  return config;
}

PmuConfig add_random_pmus(const BusBranchModel& model, PmuConfig pmu, double p, std::uint64_t seed) {
  if (p < 0.0 || p > 1.0) throw Error(Errc::InvalidInput, "PMU probability must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index bus = 0; bus < model.bus_count(); ++bus) {
    const double draw = u(rng);
    if (!pmu.has_pmu(bus) && draw < p) pmu.add(bus);
  }
  return pmu;
}

}  // namespace pmugbp
