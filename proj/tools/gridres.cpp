// gridres: feeder power flow, load-altering attack studies and DG planning.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridres/attacks.hpp"
#include "gridres/dgopt.hpp"
#include "gridres/netmodel.hpp"
#include "gridres/powerflow.hpp"
#include "gridres/scenario.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace gridres;

namespace {

struct CaseOptions {
  std::string ref;
  std::optional<double> slack_v;
  std::string dg;  // "bus:kw,bus:kw,..."
  double band_min = VoltageBand{}.v_min;
  double band_max = VoltageBand{}.v_max;

  VoltageBand band() const { return {band_min, band_max}; }
};

void add_case_options(CLI::App* cmd, CaseOptions& opt, bool with_dg = true) {
  cmd->add_option("case", opt.ref, "Bundled case name or case file path")->required();
  cmd->add_option("--slack-v", opt.slack_v, "Slack voltage override, p.u.");
  if (with_dg) {
    cmd->add_option("--dg", opt.dg, "DG units as bus:kw pairs, e.g. 30:852,24:765");
  }
  cmd->add_option("--band-min", opt.band_min, "Voltage band floor, p.u.");
  cmd->add_option("--band-max", opt.band_max, "Voltage band ceiling, p.u.");
}

std::vector<DgUnit> parse_dg_list(const std::string& text) {
  std::vector<DgUnit> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("DG entry '" + item + "' is not bus:kw");
    }
    out.push_back({std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1)), 0.0});
  }
  return out;
}

NetworkCase build_case(const CaseOptions& opt) {
  NetworkCase net = resolve_case(opt.ref);
  if (opt.slack_v) {
    net.slack_voltage_pu = *opt.slack_v;
    validate_case(net);
  }
  if (!opt.dg.empty()) net = apply_dg(net, parse_dg_list(opt.dg));
  validate_band(opt.band());
  return net;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void print_solution(const PowerFlowSolution& sol, const VoltageBand& band) {
  std::printf("converged: %s (%d iterations, mismatch %.3e p.u.)\n",
              sol.converged ? "yes" : "no", sol.iterations, sol.max_mismatch);
  if (!sol.converged) return;
  const LossTotals loss = total_losses(sol);
  const LimitReport limits = check_limits(sol, band);
  std::printf("losses: %.4f kW, %.4f kVAr\n", loss.p_kw, loss.q_kvar);
  std::printf("min voltage: %.6f p.u. at bus %d\n", limits.v_min, limits.min_bus);
  std::printf("max voltage: %.6f p.u. at bus %d\n", limits.v_max, limits.max_bus);
  std::printf("band [%.3f, %.3f]: %zu violation(s)\n", band.v_min, band.v_max,
              limits.violations.size());
}

std::vector<BusId> parse_targets(const std::vector<std::string>& raw) {
  std::vector<BusId> out;
  for (const auto& token : raw) out.push_back(std::stoi(token));
  return out;
}

int fail(const std::string& kind, const std::string& message) {
  nlohmann::json record = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << record.dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial feeder attack-resilience and DG planning toolkit"};
  app.require_subcommand(1);

  CaseOptions copt;
  SolveOptions sopt;
  std::string out_path;

  auto* loadflow = app.add_subcommand("loadflow", "Solve the base power flow");
  add_case_options(loadflow, copt);
  loadflow->add_option("--tol", sopt.tolerance, "Voltage-change tolerance, p.u.");
  loadflow->add_option("--max-iter", sopt.max_iterations, "Iteration limit");
  loadflow->add_option("--out", out_path, "Directory for buses.csv / branches.csv");

  std::size_t k = 3;
  auto* rank = app.add_subcommand("rank", "Rank buses by voltage magnitude");
  add_case_options(rank, copt);
  rank->add_option("-k", k, "Number of critical buses to report");

  std::vector<std::string> targets;
  double delta = 0.15;
  auto* step = app.add_subcommand("attack-step", "Step load-altering attack");
  add_case_options(step, copt);
  step->add_option("--targets", targets, "Target buses")->delimiter(',')->required();
  step->add_option("--delta", delta, "Relative load increase (0.15 = +15%)");
  step->add_option("--out", out_path, "Directory for attacked solution CSVs");

  DynamicAttackSpec dyn;
  std::string mode = "multiplicative";
  auto* dynamic = app.add_subcommand("attack-dynamic", "Oscillating quasi-static attack");
  add_case_options(dynamic, copt);
  dynamic->add_option("--targets", targets, "Target buses")->delimiter(',')->required();
  dynamic->add_option("--peak", dyn.peak_delta, "Peak relative load increase A");
  dynamic->add_option("--osc", dyn.oscillation_ratio, "Oscillation ratio B");
  dynamic->add_option("--freq", dyn.frequency_hz, "Oscillation frequency, Hz");
  dynamic->add_option("--ramp", dyn.ramp_duration_s, "Ramp duration, s");
  dynamic->add_option("--horizon", dyn.horizon_s, "Horizon, s");
  dynamic->add_option("--dt", dyn.time_step_s, "Time step, s");
  dynamic->add_option("--mode", mode, "multiplicative | additive")
      ->check(CLI::IsMember({"multiplicative", "additive"}));
  dynamic->add_option("--out", out_path, "Directory for time-series CSVs");

  PsoConfig pso;
  ObjectiveWeights weights;
  auto* optimize = app.add_subcommand("optimize-dg", "PSO siting/sizing of three DG units");
  add_case_options(optimize, copt, false);
  optimize->add_option("--swarm", pso.swarm_size, "Swarm size");
  optimize->add_option("--iters", pso.iterations, "Iterations");
  optimize->add_option("--seed", pso.seed, "Random seed");
  optimize->add_option("--threads", pso.threads, "Evaluation threads (0 = all cores)");
  optimize->add_option("--alpha", weights.alpha, "Real-loss weight (p.u. losses)");
  optimize->add_option("--beta", weights.beta, "Reactive-loss weight (p.u. losses)");
  optimize->add_option("--v-ref", weights.v_ref, "Reference voltage, p.u.");
  optimize->add_option("--band-penalty", weights.band_penalty, "Band violation weight");
  optimize->add_option("--out", out_path, "Report JSON path (default: stdout)");

  std::string scenario_path;
  auto* run = app.add_subcommand("run", "Execute a scenario file into a report bundle");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", out_path, "Bundle directory (overrides the scenario)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*loadflow) {
      const NetworkCase net = build_case(copt);
      const PowerFlowSolution sol = solve(net, sopt);
      print_solution(sol, copt.band());
      if (!out_path.empty()) {
        std::ostringstream buses, branches;
        write_bus_csv(buses, sol);
        write_branch_csv(branches, sol);
        write_text(fs::path(out_path) / "buses.csv", buses.str());
        write_text(fs::path(out_path) / "branches.csv", branches.str());
      }
      return sol.converged ? 0 : fail("convergence", "power flow did not converge");
    }
    if (*rank) {
      const PowerFlowSolution sol = solve(build_case(copt));
      if (!sol.converged) return fail("convergence", "power flow did not converge");
      const CriticalityRanking ranking = rank_vm(sol);
      const auto critical = select_critical(ranking, k);
      std::printf("rank,bus_id,v_pu\n");
      for (const auto& e : ranking.entries) {
        std::printf("%d,%d,%.6f\n", e.rank, e.bus, e.vm);
      }
      std::printf("critical:");
      for (BusId id : critical) std::printf(" %d", id);
      std::printf("\n");
      return 0;
    }
    if (*step) {
      const NetworkCase net = build_case(copt);
      const StepAttackResult r = run_step_attack(net, {parse_targets(targets), delta});
      const LimitReport limits = check_limits(r.attacked, copt.band());
      std::printf("baseline losses: %.4f kW, %.4f kVAr\n", r.baseline_losses.p_kw,
                  r.baseline_losses.q_kvar);
      std::printf("attacked losses: %.4f kW, %.4f kVAr (+%.4f kW, +%.4f kVAr)\n",
                  r.attacked_losses.p_kw, r.attacked_losses.q_kvar, r.delta_p_loss_kw(),
                  r.delta_q_loss_kvar());
      std::printf("min voltage: %.6f p.u. at bus %d (baseline %.6f)\n", limits.v_min,
                  limits.min_bus, r.baseline.magnitudes().minCoeff());
      std::printf("band breach: %s\n", limits.breach ? "yes" : "no");
      if (!out_path.empty()) {
        std::ostringstream buses, branches;
        write_bus_csv(buses, r.attacked);
        write_branch_csv(branches, r.attacked);
        write_text(fs::path(out_path) / "attacked_buses.csv", buses.str());
        write_text(fs::path(out_path) / "attacked_branches.csv", branches.str());
      }
      return 0;
    }
    if (*dynamic) {
      const NetworkCase net = build_case(copt);
      dyn.targets = parse_targets(targets);
      dyn.mode = mode == "additive" ? OscillationMode::kAdditive
                                    : OscillationMode::kMultiplicative;
      const TimeSeriesResult ts = run_time_series(net, dyn, copt.band());
      std::printf("samples: %zu\n", ts.samples.size());
      std::printf("global min voltage: %.6f p.u.\n", ts.global_min);
      if (ts.first_breach_t) {
        std::printf("first breach: t = %.3f s\n", *ts.first_breach_t);
      } else {
        std::printf("first breach: none\n");
      }
      if (!out_path.empty()) {
        std::ostringstream series, voltages;
        write_timeseries_csv(series, ts);
        write_timeseries_voltages_csv(voltages, ts);
        write_text(fs::path(out_path) / "timeseries.csv", series.str());
        write_text(fs::path(out_path) / "timeseries_voltages.csv", voltages.str());
      }
      return 0;
    }
    if (*optimize) {
      const NetworkCase net = build_case(copt);
      weights.band = copt.band();
      const OptimizationResult result = pso_optimize(net, weights, pso);
      const std::string report = optimization_report_json(net, result) + "\n";
      if (out_path.empty()) {
        std::cout << report;
      } else {
        write_text(out_path, report);
        for (const auto& u : result.best_placement.units) {
          std::printf("DG at bus %d: %.3f kW\n", u.bus, u.p_kw);
        }
        std::printf("objective: %.9g\n", result.best_objective);
      }
      return 0;
    }
    if (*run) {
      const std::optional<fs::path> out =
          out_path.empty() ? std::nullopt : std::optional<fs::path>(out_path);
      const ReportBundle bundle = run_scenario(fs::path(scenario_path), out);
      std::printf("bundle: %s\n", bundle.directory.c_str());
      std::printf("artifacts: %zu\n", bundle.artifacts.size());
      if (!bundle.ok) return fail("scenario", bundle.error);
      return 0;
    }
  } catch (const TopologyError& e) {
    return fail("topology", e.what());
  } catch (const CaseError& e) {
    return fail("case", e.what());
  } catch (const ScenarioError& e) {
    return fail("scenario", e.what());
  } catch (const ConvergenceError& e) {
    return fail("convergence", e.what());
  } catch (const TimeSeriesError& e) {
    return fail("convergence", e.what());
  } catch (const std::exception& e) {
    return fail("invalid_argument", e.what());
  }
  return 0;
}
