#include "gridres/dgopt.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "json.hpp"

namespace gridres {

void validate_weights(const ObjectiveWeights& weights) {
  if (!(weights.alpha >= 0.0) || !(weights.beta >= 0.0) ||
      !(weights.band_penalty >= 0.0)) {
    throw std::invalid_argument("objective weights must be non-negative");
  }
  if (!(weights.v_ref >= 0.9 && weights.v_ref <= 1.1)) {
    throw std::invalid_argument("v_ref must lie within [0.9, 1.1] p.u.");
  }
  validate_band(weights.band);
}

double objective_from_solution(const PowerFlowSolution& solution,
                               const ObjectiveWeights& weights) {
  if (!solution.converged) return kInfeasibleObjective;
  const double s_base_kva = solution.s_base_mva * 1000.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < solution.bus_ids.size(); ++i) {
    const auto entry = solution.parent_entry[i];
    if (entry < 0) continue;
    const double v = std::abs(solution.voltages[static_cast<Eigen::Index>(i)]);
    const auto& br = solution.branches[static_cast<std::size_t>(entry)];
    const double under = std::max(0.0, weights.band.v_min - v);
    const double over = std::max(0.0, v - weights.band.v_max);
    sum += (v - weights.v_ref) * (v - weights.v_ref) +
           weights.alpha * br.p_loss_kw / s_base_kva +
           weights.beta * br.q_loss_kvar / s_base_kva +
           weights.band_penalty * (under * under + over * over);
  }
  return std::isfinite(sum) ? sum : kInfeasibleObjective;
}

double evaluate_objective(const NetworkCase& net, const DgPlacement& placement,
                          const ObjectiveWeights& weights,
                          const SolveOptions& options) {
  return objective_from_solution(solve(apply_dg(net, placement), options), weights);
}

namespace {

std::vector<BusId> candidate_buses(const NetworkCase& net) {
  std::vector<BusId> out;
  for (const auto& b : net.buses) {
    if (!b.is_slack) out.push_back(b.id);
  }
  if (out.size() < 3) {
    throw std::invalid_argument("DG placement needs at least three non-slack buses");
  }
  return out;
}

double snap_size(double kw, std::span<const double> grid) {
  kw = std::clamp(kw, kDgMinKw, kDgMaxKw);
  if (grid.empty()) return kw;
  double best = grid.front();
  for (double g : grid) {
    if (std::abs(g - kw) < std::abs(best - kw)) best = g;
  }
  return best;
}

DgPlacement decode_with(const Particle& position, std::span<const BusId> candidates,
                        std::span<const double> size_grid) {
  if (!position.allFinite()) {
    throw std::invalid_argument("particle position must be finite");
  }
  const auto m = static_cast<long>(candidates.size());
  std::vector<bool> used(candidates.size(), false);
  DgPlacement placement;
  for (int k = 0; k < 3; ++k) {
    const long coord = std::clamp(std::lround(position[k]), 2L, m + 1);
    auto idx = static_cast<std::size_t>(coord - 2);
    while (used[idx]) idx = (idx + 1) % candidates.size();
    used[idx] = true;
    placement.units[static_cast<std::size_t>(k)] = {
        candidates[idx], snap_size(position[3 + k], size_grid), 0.0};
  }
  return placement;
}

// Runs `fn(i)` for i in [0, n) across up to `threads` workers. Results are
// written by index, so output does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < n; i += threads) fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

DgPlacement decode_particle(const Particle& position, const NetworkCase& net,
                            std::span<const double> size_grid) {
  const auto candidates = candidate_buses(net);
  return decode_with(position, candidates, size_grid);
}

void validate_config(const PsoConfig& config) {
  if (config.swarm_size < 1) throw std::invalid_argument("swarm_size must be >= 1");
  if (config.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (!(config.inertia >= 0.0) || !(config.cognitive >= 0.0) ||
      !(config.social >= 0.0)) {
    throw std::invalid_argument("PSO coefficients must be non-negative");
  }
  if (!(config.velocity_clamp > 0.0)) {
    throw std::invalid_argument("velocity clamp must be positive");
  }
  for (double g : config.size_grid) {
    if (!(g >= kDgMinKw && g <= kDgMaxKw)) {
      throw std::invalid_argument("size grid values must lie within [100, 5000] kW");
    }
  }
}

OptimizationResult pso_optimize(const NetworkCase& net,
                                const ObjectiveWeights& weights,
                                const PsoConfig& config) {
  validate_config(config);
  validate_weights(weights);
  validate_case(net);
  const auto candidates = candidate_buses(net);
  const std::span<const double> grid(config.size_grid);

  Particle lo;
  Particle hi;
  const double size_lo =
      grid.empty() ? kDgMinKw : *std::min_element(grid.begin(), grid.end());
  const double size_hi =
      grid.empty() ? kDgMaxKw : *std::max_element(grid.begin(), grid.end());
  for (int d = 0; d < 3; ++d) {
    lo[d] = 1.5;
    hi[d] = static_cast<double>(candidates.size()) + 1.5;
    lo[3 + d] = size_lo;
    hi[3 + d] = size_hi;
  }
  const Particle vmax = config.velocity_clamp * (hi - lo);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    Particle p;
    for (int d = 0; d < 6; ++d) p[d] = unit(rng);
    return p;
  };

  const auto n = static_cast<std::size_t>(config.swarm_size);
  std::vector<Particle> x(n);
  std::vector<Particle> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = lo + draw().cwiseProduct(hi - lo);
    v[i] = (2.0 * draw().array() - 1.0).matrix().cwiseProduct(vmax);
  }

  std::vector<double> f(n);
  std::vector<DgPlacement> decoded(n);
  auto evaluate = [&] {
    parallel_for(n, config.threads, [&](std::size_t i) {
      decoded[i] = decode_with(x[i], candidates, grid);
      f[i] = evaluate_objective(net, decoded[i], weights);
    });
  };

  OptimizationResult result;
  result.config = config;
  result.weights = weights;

  evaluate();
  result.evaluations = n;
  std::vector<Particle> best_x = x;
  std::vector<double> best_f = f;
  std::vector<DgPlacement> best_decoded = decoded;
  std::size_t g = static_cast<std::size_t>(
      std::min_element(best_f.begin(), best_f.end()) - best_f.begin());
  result.history.push_back(best_f[g]);

  for (int iter = 0; iter < config.iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      const Particle r1 = draw();
      const Particle r2 = draw();
      v[i] = config.inertia * v[i] +
             config.cognitive * r1.cwiseProduct(best_x[i] - x[i]) +
             config.social * r2.cwiseProduct(best_x[g] - x[i]);
      v[i] = v[i].cwiseMax(-vmax).cwiseMin(vmax);
      x[i] += v[i];
      for (int d = 0; d < 6; ++d) {
        if (x[i][d] < lo[d] || x[i][d] > hi[d]) {
          x[i][d] = std::clamp(x[i][d], lo[d], hi[d]);
          v[i][d] = 0.0;
        }
      }
    }
    evaluate();
    result.evaluations += n;
    for (std::size_t i = 0; i < n; ++i) {
      if (f[i] < best_f[i]) {
        best_f[i] = f[i];
        best_x[i] = x[i];
        best_decoded[i] = decoded[i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (best_f[i] < best_f[g]) g = i;
    }
    result.history.push_back(best_f[g]);
  }

  result.best_placement = best_decoded[g];
  result.best_objective = best_f[g];
  return result;
}

std::string optimization_report_json(const NetworkCase& net,
                                     const OptimizationResult& result) {
  using nlohmann::json;
  const auto& c = result.config;
  const auto& w = result.weights;
  json doc;
  doc["case"] = net.name;
  doc["seed"] = c.seed;
  doc["config"] = {{"swarm_size", c.swarm_size},
                   {"iterations", c.iterations},
                   {"inertia", c.inertia},
                   {"cognitive", c.cognitive},
                   {"social", c.social},
                   {"seed", c.seed},
                   {"velocity_clamp", c.velocity_clamp},
                   {"size_grid", c.size_grid}};
  doc["weights"] = {{"v_ref", w.v_ref},
                    {"alpha", w.alpha},
                    {"beta", w.beta},
                    {"band_penalty", w.band_penalty},
                    {"band_min_pu", w.band.v_min},
                    {"band_max_pu", w.band.v_max}};
  json units = json::array();
  for (const auto& u : result.best_placement.units) {
    units.push_back({{"bus", u.bus}, {"p_kw", u.p_kw}});
  }
  doc["best_placement"] = units;
  doc["best_objective"] = result.best_objective;
  doc["history"] = result.history;
  doc["evaluations"] = result.evaluations;

  const PowerFlowSolution sol = solve(apply_dg(net, result.best_placement));
  json pf = {{"converged", sol.converged}};
  if (sol.converged) {
    const LossTotals loss = total_losses(sol);
    const LimitReport limits = check_limits(sol, w.band);
    pf["p_loss_kw"] = loss.p_kw;
    pf["q_loss_kvar"] = loss.q_kvar;
    pf["min_v_pu"] = limits.v_min;
    pf["min_v_bus"] = limits.min_bus;
  }
  doc["power_flow"] = pf;
  return doc.dump(2);
}

}  // namespace gridres
