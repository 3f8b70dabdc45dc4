// Load-altering attack scenarios: step attacks and quasi-static oscillating
// time series on chosen target buses.
#pragma once

#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gridres/netmodel.hpp"
#include "gridres/powerflow.hpp"

namespace gridres {

struct AttackSpec {
  std::vector<BusId> targets;
  double delta = 0.0;  // relative load increase, 0.15 = +15 %
};

void validate_attack(const NetworkCase& net, const AttackSpec& spec);

struct StepAttackResult {
  AttackSpec spec;
  PowerFlowSolution baseline;
  PowerFlowSolution attacked;
  LossTotals baseline_losses;
  LossTotals attacked_losses;

  double delta_p_loss_kw() const { return attacked_losses.p_kw - baseline_losses.p_kw; }
  double delta_q_loss_kvar() const { return attacked_losses.q_kvar - baseline_losses.q_kvar; }
};

StepAttackResult run_step_attack(const NetworkCase& net, const AttackSpec& spec,
                                 const SolveOptions& options = {});

enum class OscillationMode {
  /// m(t) = 1 + A r(t) (1 + B sin(2 pi f t)); oscillation rides on the ramp.
  kMultiplicative,
  /// m(t) = 1 + A (r(t) + B sin(2 pi f t)); full-amplitude oscillation from t = 0.
  kAdditive,
};

struct DynamicAttackSpec {
  std::vector<BusId> targets;
  double peak_delta = 0.20;
  double oscillation_ratio = 0.5;
  double frequency_hz = 1.0 / 60.0;
  double ramp_duration_s = 300.0;
  double horizon_s = 900.0;
  double time_step_s = 1.0;
  OscillationMode mode = OscillationMode::kMultiplicative;
};

void validate_dynamic_attack(const DynamicAttackSpec& spec);

/// Load multiplier applied to the targets at time `t` (1 = unattacked).
double multiplier_at(const DynamicAttackSpec& spec, double t);

/// Sample times k * time_step for k = 0 .. floor(horizon / time_step).
std::vector<double> sample_times(const DynamicAttackSpec& spec);

struct TimeSample {
  double t = 0.0;
  Eigen::VectorXd vm;
  double p_loss_kw = 0.0;
  double q_loss_kvar = 0.0;
  double min_voltage = 0.0;
  bool breach = false;
};

struct TimeSeriesResult {
  std::vector<BusId> bus_ids;
  std::vector<TimeSample> samples;
  double global_min = 0.0;
  std::optional<double> first_breach_t;
};

/// Per-step solve failure. Carries the trace up to the failing step.
class TimeSeriesError : public std::runtime_error {
 public:
  TimeSeriesError(const std::string& what, TimeSeriesResult partial, double t)
      : std::runtime_error(what), partial_(std::move(partial)), failed_t_(t) {}

  const TimeSeriesResult& partial() const { return partial_; }
  double failed_t() const { return failed_t_; }

 private:
  TimeSeriesResult partial_;
  double failed_t_;
};

TimeSeriesResult run_time_series(const NetworkCase& net,
                                 const DynamicAttackSpec& spec,
                                 const VoltageBand& band = {},
                                 const SolveOptions& options = {});

/// t_s,min_v_pu,p_loss_kw,q_loss_kvar,breach
void write_timeseries_csv(std::ostream& out, const TimeSeriesResult& result);
/// t_s,v_<bus>... one column per bus
void write_timeseries_voltages_csv(std::ostream& out,
                                   const TimeSeriesResult& result);

}  // namespace gridres
