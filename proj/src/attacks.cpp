#include "gridres/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "csv.hpp"

namespace gridres {

namespace {

void validate_targets(const NetworkCase& net, const std::vector<BusId>& targets) {
  if (targets.empty()) throw std::invalid_argument("attack has no target buses");
  std::set<BusId> seen;
  for (BusId id : targets) {
    if (net.buses[net.index_of(id)].is_slack) {
      throw std::invalid_argument("slack bus cannot be an attack target");
    }
    if (!seen.insert(id).second) {
      throw std::invalid_argument("duplicate attack target " + std::to_string(id));
    }
  }
}

}  // namespace

void validate_attack(const NetworkCase& net, const AttackSpec& spec) {
  if (!(spec.delta > -1.0)) throw std::invalid_argument("attack delta must exceed -1");
  validate_targets(net, spec.targets);
}

StepAttackResult run_step_attack(const NetworkCase& net, const AttackSpec& spec,
                                 const SolveOptions& options) {
  validate_attack(net, spec);
  StepAttackResult result;
  result.spec = spec;
  result.baseline = solve(net, options);
  result.attacked = solve(scale_loads(net, spec.targets, spec.delta), options);
  result.baseline_losses = total_losses(result.baseline);
  result.attacked_losses = total_losses(result.attacked);
  return result;
}

void validate_dynamic_attack(const DynamicAttackSpec& spec) {
  if (!(spec.peak_delta > -1.0)) throw std::invalid_argument("peak delta must exceed -1");
  if (!(spec.oscillation_ratio >= 0.0)) {
    throw std::invalid_argument("oscillation ratio must be non-negative");
  }
  if (!(spec.frequency_hz >= 0.0)) {
    throw std::invalid_argument("oscillation frequency must be non-negative");
  }
  if (!(spec.time_step_s > 0.0) || !(spec.time_step_s <= spec.horizon_s)) {
    throw std::invalid_argument("time step must lie in (0, horizon]");
  }
  if (!(spec.ramp_duration_s >= 0.0) || !(spec.ramp_duration_s <= spec.horizon_s)) {
    throw std::invalid_argument("ramp duration must lie in [0, horizon]");
  }
}

double multiplier_at(const DynamicAttackSpec& spec, double t) {
  if (!(t >= 0.0 && t <= spec.horizon_s)) {
    throw std::out_of_range("time outside [0, horizon]");
  }
  const double ramp =
      spec.ramp_duration_s > 0.0 ? std::min(t / spec.ramp_duration_s, 1.0) : 1.0;
  const double wave =
      spec.oscillation_ratio * std::sin(2.0 * std::numbers::pi * spec.frequency_hz * t);
  if (spec.mode == OscillationMode::kAdditive) {
    return 1.0 + spec.peak_delta * (ramp + wave);
  }
  return 1.0 + spec.peak_delta * ramp * (1.0 + wave);
}

std::vector<double> sample_times(const DynamicAttackSpec& spec) {
  validate_dynamic_attack(spec);
  const auto steps =
      static_cast<long>(std::floor(spec.horizon_s / spec.time_step_s + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  for (long k = 0; k <= steps; ++k) {
    out.push_back(std::min(static_cast<double>(k) * spec.time_step_s, spec.horizon_s));
  }
  return out;
}

TimeSeriesResult run_time_series(const NetworkCase& net,
                                 const DynamicAttackSpec& spec,
                                 const VoltageBand& band,
                                 const SolveOptions& options) {
  validate_dynamic_attack(spec);
  validate_targets(net, spec.targets);
  validate_band(band);

  TimeSeriesResult result;
  result.bus_ids.reserve(net.buses.size());
  for (const auto& b : net.buses) result.bus_ids.push_back(b.id);
  result.global_min = std::numeric_limits<double>::infinity();

  for (double t : sample_times(spec)) {
    const double m = multiplier_at(spec, t);
    if (!(m > 0.0)) {
      throw TimeSeriesError("load multiplier drops to zero or below", result, t);
    }
    const PowerFlowSolution sol =
        solve(scale_loads(net, spec.targets, m - 1.0), options);
    if (!sol.converged) {
      throw TimeSeriesError("power flow did not converge at t = " + csv::num(t) + " s",
                            result, t);
    }
    TimeSample sample;
    sample.t = t;
    sample.vm = sol.magnitudes();
    const LossTotals loss = total_losses(sol);
    sample.p_loss_kw = loss.p_kw;
    sample.q_loss_kvar = loss.q_kvar;
    sample.min_voltage = sample.vm.minCoeff();
    sample.breach = sample.min_voltage < band.v_min || sample.vm.maxCoeff() > band.v_max;
    if (sample.breach && !result.first_breach_t) result.first_breach_t = t;
    result.global_min = std::min(result.global_min, sample.min_voltage);
    result.samples.push_back(std::move(sample));
  }
  return result;
}

void write_timeseries_csv(std::ostream& out, const TimeSeriesResult& result) {
  out << "t_s,min_v_pu,p_loss_kw,q_loss_kvar,breach\n";
  for (const auto& s : result.samples) {
    out << csv::num(s.t) << ',' << csv::num(s.min_voltage) << ','
        << csv::num(s.p_loss_kw) << ',' << csv::num(s.q_loss_kvar) << ','
        << (s.breach ? 1 : 0) << '\n';
  }
}

void write_timeseries_voltages_csv(std::ostream& out,
                                   const TimeSeriesResult& result) {
  out << "t_s";
  for (BusId id : result.bus_ids) out << ",v_" << id;
  out << '\n';
  for (const auto& s : result.samples) {
    out << csv::num(s.t);
    for (Eigen::Index i = 0; i < s.vm.size(); ++i) out << ',' << csv::num(s.vm[i]);
    out << '\n';
  }
}

}  // namespace gridres
