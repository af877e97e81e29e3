#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pmugbp/gbp_engine.hpp"

namespace pmugbp {

struct StreamConfig {
  double update_fraction = 0.6;
  double aging_factor = 1e2;
  int iterations_per_condition = 9;
  std::uint64_t seed = 1;
  GraphMode mode = GraphMode::Fusion;
  CovarianceModel covariance = CovarianceModel::Full;
  SolverConfig solver;

  void validate() const;
};

struct Condition {
  GroundTruthState truth;
  std::vector<RectangularPhasor> measurements;
};

using ConditionSchedule = std::vector<Condition>;

struct DriftOptions {
  double step_lo = 0.01;
  double step_hi = 0.03;
};

/// `count` operating states: the first is `base`, each next one moves every
/// bus magnitude and angle by a random step of random sign.
std::vector<GroundTruthState> drift_states(const GroundTruthState& base, Index count, std::uint64_t seed,
                                           const DriftOptions& options = {});

/// One independently generated measurement set per state, same channels.
ConditionSchedule make_schedule(const BusBranchModel& model, const std::vector<GroundTruthState>& states,
                                const PmuConfig& pmu, const MeasurementVariances& variances, std::uint64_t seed);

/// Replaces round(fraction * m) randomly chosen source measurements with the
/// values of `current`, multiplies the covariance of every other source by
/// the aging factor, and pushes refreshed voltage values straight into the
/// outgoing messages of their variables. Returns the refreshed source ids,
/// ascending.
std::vector<Index> step_measurements(GbpEngine& engine, const std::vector<RectangularPhasor>& current,
                                     const StreamConfig& config, std::mt19937_64& rng);

struct StreamStep {
  int step = 0;
  Index condition = 0;
  std::vector<Index> refreshed;
  std::vector<Vec2> estimate;  // per bus
  double max_delta = 0.0;
};

struct StreamTrace {
  std::vector<StreamStep> steps;
  std::vector<GroundTruthState> truths;  // per condition
};

/// Runs one GBP iteration per step, switching condition every
/// `iterations_per_condition` steps. The graph starts from the first
/// condition's measurements.
StreamTrace run_stream(const BusBranchModel& model, const ConditionSchedule& schedule, const StreamConfig& config);

}  // namespace pmugbp
