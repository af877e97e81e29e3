#include "pmugbp/power_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace pmugbp {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::Parse: return "Parse";
    case Errc::UnknownEndpoint: return "UnknownEndpoint";
    case Errc::EmptyMeasurementSet: return "EmptyMeasurementSet";
    case Errc::MixedPairs: return "MixedPairs";
    case Errc::Unobservable: return "Unobservable";
    case Errc::ResultNotPD: return "ResultNotPD";
    case Errc::AllSingular: return "AllSingular";
    case Errc::SingularInnovation: return "SingularInnovation";
    case Errc::SingularBelief: return "SingularBelief";
    case Errc::NotConverged: return "NotConverged";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::NearSingular: return "NearSingular";
    case Errc::PowerIterationStalled: return "PowerIterationStalled";
  }
  return "Unknown";
}

bool is_input_error(Errc code) {
  switch (code) {
    case Errc::InvalidInput:
    case Errc::Parse:
    case Errc::UnknownEndpoint:
    case Errc::EmptyMeasurementSet:
    case Errc::MixedPairs:
      return true;
    default:
      return false;
  }
}

Branch Branch::from_impedance(Index from, Index to, double r, double x, double g_s, double b_s,
                              double tau, double phi) {
  if (r == 0.0 && x == 0.0) {
    throw Error(Errc::InvalidInput, "branch impedance r + jx must be nonzero");
  }
  const std::complex<double> y = 1.0 / std::complex<double>(r, x);
  Branch br;
  br.from = from;
  br.to = to;
  br.g = y.real();
  br.b = y.imag();
  br.g_s = g_s;
  br.b_s = b_s;
  br.tau = tau;
  br.phi = phi;
  return br;
}

BusBranchModel::BusBranchModel(std::vector<Bus> buses, std::vector<Branch> branches)
    : buses_(std::move(buses)), branches_(std::move(branches)) {
  const auto n = static_cast<Index>(buses_.size());
  if (n == 0) throw Error(Errc::InvalidInput, "network has no buses");
  for (Index i = 0; i < n; ++i) buses_[static_cast<std::size_t>(i)].id = i;
  {
    std::vector<Index> labels;
    labels.reserve(buses_.size());
    for (const auto& bus : buses_) labels.push_back(bus.label);
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
      throw Error(Errc::InvalidInput, "duplicate bus id");
    }
  }
  incident_.assign(buses_.size(), {});
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const Branch& br = branches_[k];
    std::ostringstream where;
    where << "branch " << k;
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n) {
      throw Error(Errc::UnknownEndpoint, where.str() + " references a bus that does not exist");
    }
    if (br.from == br.to) throw Error(Errc::InvalidInput, where.str() + " is a self-branch");
    if (!(br.tau > 0.0)) throw Error(Errc::InvalidInput, where.str() + " has non-positive tap ratio");
    if (br.g == 0.0 && br.b == 0.0) {
      throw Error(Errc::InvalidInput, where.str() + " has zero series admittance");
    }
    incident_[static_cast<std::size_t>(br.from)].push_back(static_cast<Index>(k));
    incident_[static_cast<std::size_t>(br.to)].push_back(static_cast<Index>(k));
  }

  std::vector<bool> seen(buses_.size(), false);
  std::vector<Index> stack{0};
  seen[0] = true;
  Index reached = 1;
  while (!stack.empty()) {
    const Index bus = stack.back();
    stack.pop_back();
    for (Index k : incident_[static_cast<std::size_t>(bus)]) {
      const Branch& br = branches_[static_cast<std::size_t>(k)];
      const Index other = br.from == bus ? br.to : br.from;
      if (!seen[static_cast<std::size_t>(other)]) {
        seen[static_cast<std::size_t>(other)] = true;
        ++reached;
        stack.push_back(other);
      }
    }
  }
  if (reached != n) throw Error(Errc::InvalidInput, "network is not connected");
}

std::optional<Index> BusBranchModel::bus_by_label(Index label) const {
  for (const auto& bus : buses_) {
    if (bus.label == label) return bus.id;
  }
  return std::nullopt;
}

bool PmuConfig::has_pmu(Index bus) const {
  return std::any_of(sites.begin(), sites.end(), [bus](const PmuSite& s) { return s.bus == bus; });
}

void PmuConfig::add(Index bus) {
  if (has_pmu(bus)) return;
  auto pos = std::lower_bound(sites.begin(), sites.end(), bus,
                              [](const PmuSite& s, Index b) { return s.bus < b; });
  sites.insert(pos, PmuSite{bus, true, std::nullopt});
}

RectangularPhasor polar_to_rectangular(const PolarPhasor& p) {
  const double c = std::cos(p.z_theta);
  const double s = std::sin(p.z_theta);
  const double m2 = p.z_m * p.z_m;

  RectangularPhasor out;
  out.kind = p.kind;
  out.z << p.z_m * c, p.z_m * s;
  const double var_re = p.var_m * c * c + p.var_theta * m2 * s * s;
  const double var_im = p.var_m * s * s + p.var_theta * m2 * c * c;
  const double cov = (p.var_m - m2 * p.var_theta) * (s * c);
  out.sigma << var_re, cov, cov, var_im;

  const double det = var_re * var_im - cov * cov;
  if (!(var_re > 0.0) || !(det > 0.0) || !std::isfinite(det)) {
    throw Error(Errc::ResultNotPD, "rectangular covariance is not positive definite");
  }
  return out;
}

std::vector<RectangularPhasor> to_rectangular(const std::vector<PolarPhasor>& phasors) {
  std::vector<RectangularPhasor> out;
  out.reserve(phasors.size());
  for (const auto& p : phasors) out.push_back(polar_to_rectangular(p));
  return out;
}

std::vector<Index> phasor_buses(const BusBranchModel& model, const PhasorKind& kind) {
  if (const auto* v = std::get_if<BusVoltage>(&kind)) {
    if (v->bus < 0 || v->bus >= model.bus_count()) {
      throw Error(Errc::UnknownEndpoint, "voltage phasor references unknown bus");
    }
    return {v->bus};
  }
  const auto& c = std::get<BranchCurrent>(kind);
  if (c.branch < 0 || c.branch >= model.branch_count()) {
    throw Error(Errc::UnknownEndpoint, "current phasor references unknown branch");
  }
  const Branch& br = model.branch(c.branch);
  return {br.from, br.to};
}

Vec2 evaluate_phasor(const BusBranchModel& model, const PhasorKind& kind, const GroundTruthState& x) {
  if (const auto* v = std::get_if<BusVoltage>(&kind)) {
    phasor_buses(model, kind);
    return x[static_cast<std::size_t>(v->bus)];
  }
  const auto& c = std::get<BranchCurrent>(kind);
  phasor_buses(model, kind);
  const Branch& br = model.branch(c.branch);
  const auto [h_from, h_to] = current_coefficients(br, c.direction);
  return h_from * x[static_cast<std::size_t>(br.from)] + h_to * x[static_cast<std::size_t>(br.to)];
}

std::vector<PhasorKind> measured_channels(const BusBranchModel& model, const PmuConfig& pmu) {
  std::vector<PhasorKind> out;
  for (const auto& site : pmu.sites) {
    if (site.bus < 0 || site.bus >= model.bus_count()) {
      throw Error(Errc::UnknownEndpoint, "PMU placed at unknown bus");
    }
    if (site.voltage) out.emplace_back(BusVoltage{site.bus});
  }
  for (const auto& site : pmu.sites) {
    const std::vector<Index>& branches = site.branches ? *site.branches : model.incident(site.bus);
    for (Index k : branches) {
      if (k < 0 || k >= model.branch_count()) {
        throw Error(Errc::UnknownEndpoint, "PMU channel references unknown branch");
      }
      const Branch& br = model.branch(k);
      if (br.from != site.bus && br.to != site.bus) {
        throw Error(Errc::InvalidInput, "PMU channel branch is not incident to the PMU bus");
      }
      out.emplace_back(BranchCurrent{k, br.from == site.bus ? Direction::FromTo : Direction::ToFrom});
    }
  }
  return out;
}

std::vector<PolarPhasor> generate_measurements(const BusBranchModel& model, const GroundTruthState& state,
                                               const PmuConfig& pmu, const MeasurementVariances& variances,
                                               std::uint64_t seed) {
  if (static_cast<Index>(state.size()) != model.bus_count()) {
    throw Error(Errc::InvalidInput, "state length does not match bus count");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<PolarPhasor> out;
  for (const auto& kind : measured_channels(model, pmu)) {
    const Vec2 exact = evaluate_phasor(model, kind, state);
    const bool voltage = is_voltage(kind);
    PolarPhasor p;
    p.kind = kind;
    p.var_m = voltage ? variances.voltage_m : variances.current_m;
    p.var_theta = voltage ? variances.voltage_theta : variances.current_theta;
    // Draw both samples unconditionally so the stream does not depend on
    // which variances happen to be zero.
    const double e_m = unit(rng);
    const double e_theta = unit(rng);
    p.z_m = std::hypot(exact(0), exact(1)) + std::sqrt(p.var_m) * e_m;
    p.z_theta = std::atan2(exact(1), exact(0)) + std::sqrt(p.var_theta) * e_theta;
    out.push_back(p);
  }
  return out;
}

}  // namespace pmugbp
