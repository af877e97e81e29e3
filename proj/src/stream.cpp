#include "pmugbp/stream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pmugbp {

void StreamConfig::validate() const {
  if (!(update_fraction > 0.0 && update_fraction <= 1.0)) {
    throw Error(Errc::InvalidInput, "update fraction must lie in (0, 1]");
  }
  if (!(aging_factor > 1.0)) throw Error(Errc::InvalidInput, "aging factor must exceed 1");
  if (iterations_per_condition < 1) throw Error(Errc::InvalidInput, "iterations per condition must be positive");
  solver.validate();
}

std::vector<GroundTruthState> drift_states(const GroundTruthState& base, Index count, std::uint64_t seed,
                                           const DriftOptions& options) {
  if (count < 1) throw Error(Errc::InvalidInput, "need at least one condition");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> step(options.step_lo, options.step_hi);
  std::bernoulli_distribution sign(0.5);
  std::vector<GroundTruthState> out{base};
  for (Index k = 1; k < count; ++k) {
    GroundTruthState next = out.back();
    for (auto& x : next) {
      const double mag = x.norm() + (sign(rng) ? 1.0 : -1.0) * step(rng);
      const double ang = std::atan2(x(1), x(0)) + (sign(rng) ? 1.0 : -1.0) * step(rng);
      x << mag * std::cos(ang), mag * std::sin(ang);
    }
    out.push_back(std::move(next));
  }
  return out;
}

ConditionSchedule make_schedule(const BusBranchModel& model, const std::vector<GroundTruthState>& states,
                                const PmuConfig& pmu, const MeasurementVariances& variances, std::uint64_t seed) {
  ConditionSchedule schedule;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto polar = generate_measurements(model, states[k], pmu, variances, seed + k);
    schedule.push_back({states[k], to_rectangular(polar)});
  }
  return schedule;
}

std::vector<Index> step_measurements(GbpEngine& engine, const std::vector<RectangularPhasor>& current,
                                     const StreamConfig& config, std::mt19937_64& rng) {
  FactorGraph& graph = engine.graph();
  const auto m = static_cast<Index>(graph.sources.size());
  if (static_cast<Index>(current.size()) != m) {
    throw Error(Errc::InvalidInput, "condition measurement count does not match the graph");
  }
  const auto count = static_cast<Index>(std::llround(config.update_fraction * static_cast<double>(m)));
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Index> refreshed(order.begin(), order.begin() + count);
  std::sort(refreshed.begin(), refreshed.end());

  std::vector<bool> fresh(static_cast<std::size_t>(m), false);
  for (Index s : refreshed) {
    fresh[static_cast<std::size_t>(s)] = true;
    set_source(graph, s, current[static_cast<std::size_t>(s)]);
  }
  for (Index s = 0; s < m; ++s) {
    if (!fresh[static_cast<std::size_t>(s)]) scale_source_covariance(graph, s, config.aging_factor);
  }
  for (Index s : refreshed) {
    const auto& kind = current[static_cast<std::size_t>(s)].kind;
    if (!is_voltage(kind)) continue;
    for (Index var : graph.bus_variables(std::get<BusVoltage>(kind).bus)) engine.refresh_outgoing(var);
  }
  return refreshed;
}

StreamTrace run_stream(const BusBranchModel& model, const ConditionSchedule& schedule, const StreamConfig& config) {
  config.validate();
  if (schedule.empty()) throw Error(Errc::InvalidInput, "empty condition schedule");
  for (const auto& c : schedule) {
    if (c.measurements.size() != schedule.front().measurements.size()) {
      throw Error(Errc::InvalidInput, "conditions do not share one measurement layout");
    }
    for (std::size_t k = 0; k < c.measurements.size(); ++k) {
      if (c.measurements[k].kind != schedule.front().measurements[k].kind) {
        throw Error(Errc::InvalidInput, "conditions do not share one measurement layout");
      }
    }
  }

  FactorGraph graph = build_graph(model, schedule.front().measurements, config.mode, {config.covariance});
  const MessageStore initial = initialize_messages(graph);
  SolverConfig solver = config.solver;
  solver.record_trace = false;
  GbpEngine engine(std::move(graph), solver, initial);
  std::mt19937_64 rng(config.seed);

  StreamTrace trace;
  for (const auto& c : schedule) trace.truths.push_back(c.truth);
  const int steps = static_cast<int>(schedule.size()) * config.iterations_per_condition;
  for (int s = 0; s < steps; ++s) {
    const auto condition = static_cast<std::size_t>(s / config.iterations_per_condition);
    StreamStep record;
    record.step = s;
    record.condition = static_cast<Index>(condition);
    record.refreshed = step_measurements(engine, schedule[condition].measurements, config, rng);
    const auto& it = engine.step();
    record.estimate = bus_estimates(engine.graph(), it.beliefs);
    record.max_delta = it.max_delta;
    trace.steps.push_back(std::move(record));
  }
  return trace;
}

}  // namespace pmugbp
