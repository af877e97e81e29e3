#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "pmugbp/linalg.hpp"

namespace pmugbp {

struct Bus {
  Index id = 0;     // contiguous 0..n-1
  Index label = 0;  // identifier used in files
  double base_kv = 0.0;
};

/// Unified pi-model branch in per unit. `g_s`/`b_s` is the shunt admittance
/// seen at each end; `tau`/`phi` describe an ideal phase-shifting transformer
/// at the `from` end.
struct Branch {
  Index from = 0;
  Index to = 0;
  double g = 0.0;
  double b = 0.0;
  double g_s = 0.0;
  double b_s = 0.0;
  double tau = 1.0;
  double phi = 0.0;

  /// Series admittance from series impedance r + jx.
  static Branch from_impedance(Index from, Index to, double r, double x, double g_s = 0.0,
                               double b_s = 0.0, double tau = 1.0, double phi = 0.0);
};

class BusBranchModel {
 public:
  BusBranchModel() = default;
  /// Validates and finalizes: endpoints exist, no self-branches, tau > 0,
  /// connected topology. Bus ids are reassigned to 0..n-1 in input order.
  BusBranchModel(std::vector<Bus> buses, std::vector<Branch> branches);

  Index bus_count() const { return static_cast<Index>(buses_.size()); }
  Index branch_count() const { return static_cast<Index>(branches_.size()); }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const Branch& branch(Index k) const { return branches_[static_cast<std::size_t>(k)]; }
  /// Branch indices incident to `bus`, ascending.
  const std::vector<Index>& incident(Index bus) const { return incident_[static_cast<std::size_t>(bus)]; }
  std::optional<Index> bus_by_label(Index label) const;

 private:
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<std::vector<Index>> incident_;
};

enum class Direction { FromTo, ToFrom };

struct BusVoltage {
  Index bus = 0;
  bool operator==(const BusVoltage&) const = default;
};

struct BranchCurrent {
  Index branch = 0;
  Direction direction = Direction::FromTo;
  bool operator==(const BranchCurrent&) const = default;
};

using PhasorKind = std::variant<BusVoltage, BranchCurrent>;

inline bool is_voltage(const PhasorKind& kind) { return std::holds_alternative<BusVoltage>(kind); }

struct PolarPhasor {
  PhasorKind kind;
  double z_m = 0.0;
  double z_theta = 0.0;
  double var_m = 0.0;
  double var_theta = 0.0;
};

struct RectangularPhasor {
  PhasorKind kind;
  Vec2 z = Vec2::Zero();
  Mat2 sigma = Mat2::Identity();
};

/// A PMU at `bus`. By default it measures the bus voltage and the current on
/// every incident branch, oriented away from the bus; `branches` overrides
/// the current channel set.
struct PmuSite {
  Index bus = 0;
  bool voltage = true;
  std::optional<std::vector<Index>> branches;
};

struct PmuConfig {
  std::vector<PmuSite> sites;  // sorted by bus

  bool has_pmu(Index bus) const;
  Index count() const { return static_cast<Index>(sites.size()); }
  void add(Index bus);
};

/// Rectangular bus voltages [V_re, V_im] per bus.
using GroundTruthState = std::vector<Vec2>;

struct MeasurementVariances {
  double voltage_m = 1e-8;
  double voltage_theta = 1e-8;
  double current_m = 1e-6;
  double current_theta = 1e-6;
};

struct StateSpread {
  double magnitude_lo = 0.95;
  double magnitude_hi = 1.05;
  double angle_lo = -0.2;
  double angle_hi = 0.2;
};

// --- 2x2 building blocks ------------------------------------------------

/// Real 2x2 form of complex multiplication by (re + j im).
template <typename Scalar>
Matrix2<Scalar> complex_block(Scalar re, Scalar im) {
  Matrix2<Scalar> m;
  m << re, -im, im, re;
  return m;
}

template <typename Scalar>
Matrix2<Scalar> rotation_matrix(Scalar phi) {
  using std::cos;
  using std::sin;
  return complex_block<Scalar>(cos(phi), sin(phi));
}

/// Series and shunt admittance blocks (Y, Y_s).
template <typename Scalar = double>
std::pair<Matrix2<Scalar>, Matrix2<Scalar>> branch_admittance(const Branch& br) {
  return {complex_block<Scalar>(Scalar(br.g), Scalar(br.b)),
          complex_block<Scalar>(Scalar(br.g_s), Scalar(br.b_s))};
}

/// Coefficient blocks (H_from, H_to) of a branch current measured at the
/// `from` end (FromTo) or at the `to` end (ToFrom).
template <typename Scalar = double>
std::pair<Matrix2<Scalar>, Matrix2<Scalar>> current_coefficients(const Branch& br, Direction dir) {
  const auto [y, ys] = branch_admittance<Scalar>(br);
  const Scalar tau(br.tau);
  const Scalar phi(br.phi);
  if (dir == Direction::FromTo) {
    return {(y + ys) / (tau * tau), -(y * rotation_matrix<Scalar>(phi)) / tau};
  }
  return {-(y * rotation_matrix<Scalar>(-phi)) / tau, y + ys};
}

// --- measurement model ------------------------------------------------------

RectangularPhasor polar_to_rectangular(const PolarPhasor& p);

/// Buses touched by a phasor: one for voltages, (from, to) for currents.
std::vector<Index> phasor_buses(const BusBranchModel& model, const PhasorKind& kind);

/// Noise-free rectangular value of a phasor for a given state.
Vec2 evaluate_phasor(const BusBranchModel& model, const PhasorKind& kind, const GroundTruthState& x);

/// Channels in canonical order: all voltages (by PMU bus), then currents
/// grouped by PMU bus in incident-branch order.
std::vector<PhasorKind> measured_channels(const BusBranchModel& model, const PmuConfig& pmu);

/// Exact phasors from the linear model, then magnitude and angle perturbed
/// independently by zero-mean Gaussian noise. Zero variances give the exact
/// phasors. Deterministic for a given seed.
std::vector<PolarPhasor> generate_measurements(const BusBranchModel& model, const GroundTruthState& state,
                                               const PmuConfig& pmu, const MeasurementVariances& variances,
                                               std::uint64_t seed);

std::vector<RectangularPhasor> to_rectangular(const std::vector<PolarPhasor>& phasors);

// --- placement and synthetic data -------------------------------------------

/// Greedy observability-driven placement: repeatedly adds the PMU whose
/// default channel set increases rank(H) the most (ties to the lowest bus id)
/// until rank(H) = 2n. Throws Unobservable if no candidate increases the rank.
PmuConfig place_pmus_greedy(const BusBranchModel& model);

/// Installs a PMU at every bus without one independently with probability p.
PmuConfig add_random_pmus(const BusBranchModel& model, PmuConfig pmu, double p, std::uint64_t seed);

GroundTruthState synth_state(const BusBranchModel& model, std::uint64_t seed, const StateSpread& spread = {});

struct GridOptions {
  Index buses = 30;
  double average_degree = 3.0;
  Index ring_size = 10;
  double transformer_fraction = 0.1;
};

/// Ring-of-rings test grid: buses split into rings, neighbouring rings linked
/// by ladder branches, random chords added until the requested average
/// degree is reached. Electrical parameters are drawn from a seeded RNG.
BusBranchModel synth_grid(const GridOptions& options, std::uint64_t seed);

}  // namespace pmugbp
