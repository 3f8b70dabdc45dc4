// DG siting and sizing: the voltage-deviation + loss objective and a
// global-best particle swarm over a mixed bus-index / size encoding.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridres/netmodel.hpp"
#include "gridres/powerflow.hpp"

namespace gridres {

/// Weights of the placement objective. Losses enter in p.u. on s_base.
struct ObjectiveWeights {
  double v_ref = 1.0;
  double alpha = 4.0;
  double beta = 4.0;
  double band_penalty = 100.0;
  VoltageBand band;
};

void validate_weights(const ObjectiveWeights& weights);

/// Objective assigned when the power flow of a candidate fails to converge.
inline constexpr double kInfeasibleObjective = 1.0e6;

/// Objective of an already solved case:
///   sum over non-slack buses of |V_i - v_ref|^2 + alpha P_loss(i) + beta Q_loss(i)
///   + band_penalty * (max(0, v_min - V_i)^2 + max(0, V_i - v_max)^2)
double objective_from_solution(const PowerFlowSolution& solution,
                               const ObjectiveWeights& weights);

double evaluate_objective(const NetworkCase& net, const DgPlacement& placement,
                          const ObjectiveWeights& weights,
                          const SolveOptions& options = {});

/// Bus coordinates 0..2 and sizes (kW) 3..5.
using Particle = Eigen::Matrix<double, 6, 1>;

/// Maps a particle onto a valid placement. Bus coordinates address the
/// non-slack buses in case order, starting at 2 (so on a 1..N feeder with the
/// slack at bus 1 the coordinate is the bus id). Occupied buses are skipped
/// upward with wrap-around. Sizes are clamped to [100, 5000] kW and, when
/// `size_grid` is non-empty, snapped to its nearest value.
DgPlacement decode_particle(const Particle& position, const NetworkCase& net,
                            std::span<const double> size_grid = {});

struct PsoConfig {
  int swarm_size = 500;
  int iterations = 100;
  double inertia = 0.729;
  double cognitive = 1.49445;
  double social = 1.49445;
  std::uint64_t seed = 2024;
  double velocity_clamp = 0.2;  // fraction of each dimension's range
  std::vector<double> size_grid;  // empty: continuous sizes
  unsigned threads = 0;           // 0: hardware concurrency
};

void validate_config(const PsoConfig& config);

struct OptimizationResult {
  DgPlacement best_placement;
  double best_objective = 0.0;
  std::vector<double> history;  // global best after init and each iteration
  std::size_t evaluations = 0;
  PsoConfig config;
  ObjectiveWeights weights;
};

OptimizationResult pso_optimize(const NetworkCase& net,
                                const ObjectiveWeights& weights,
                                const PsoConfig& config);

/// JSON report: config echo, seed, placement, objective, history and the
/// post-placement power-flow summary. Output is deterministic for equal inputs.
std::string optimization_report_json(const NetworkCase& net,
                                     const OptimizationResult& result);

}  // namespace gridres
