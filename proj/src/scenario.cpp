#include "gridres/scenario.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "csv.hpp"
#include "gridres/hash.hpp"
#include "json.hpp"

#ifndef GRIDRES_VERSION
#define GRIDRES_VERSION "0.0.0"
#endif
#ifndef GRIDRES_DATA_DIR
#define GRIDRES_DATA_DIR "."
#endif

namespace gridres {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) {
      throw ScenarioError("unknown parameter '" + key + "' in " + where);
    }
  }
}

TargetSelection parse_targets(const json& action, const std::string& where) {
  TargetSelection sel;
  if (!action.contains("targets")) throw ScenarioError(where + " needs 'targets'");
  const json& t = action.at("targets");
  if (t.is_string()) {
    if (t.get<std::string>() != "critical") {
      throw ScenarioError(where + ": targets must be a bus list or \"critical\"");
    }
    sel.critical_k = action.value("k", std::size_t{3});
    if (sel.critical_k == 0) throw ScenarioError(where + ": k must be >= 1");
  } else {
    sel.buses = t.get<std::vector<BusId>>();
    if (sel.buses.empty()) throw ScenarioError(where + ": empty target list");
  }
  return sel;
}

ObjectiveWeights parse_weights(const json& w) {
  check_keys(w, {"v_ref", "alpha", "beta", "band_penalty"}, "weights");
  ObjectiveWeights out;
  out.v_ref = w.value("v_ref", out.v_ref);
  out.alpha = w.value("alpha", out.alpha);
  out.beta = w.value("beta", out.beta);
  out.band_penalty = w.value("band_penalty", out.band_penalty);
  return out;
}

ScenarioAction parse_action(const json& a, std::size_t index) {
  const std::string where = "action " + std::to_string(index + 1);
  if (!a.is_object() || !a.contains("action")) {
    throw ScenarioError(where + " must be an object with an 'action' field");
  }
  const auto type = a.at("action").get<std::string>();
  if (type == "solve") {
    check_keys(a, {"action", "label"}, where);
    return SolveAction{a.value("label", std::string{})};
  }
  if (type == "rank") {
    check_keys(a, {"action", "k"}, where);
    RankAction r;
    r.k = a.value("k", r.k);
    return r;
  }
  if (type == "step-attack") {
    check_keys(a, {"action", "targets", "k", "deltas"}, where);
    StepAttackAction s;
    s.targets = parse_targets(a, where);
    s.deltas = a.value("deltas", std::vector<double>{});
    if (s.deltas.empty()) throw ScenarioError(where + ": 'deltas' must be non-empty");
    return s;
  }
  if (type == "dynamic-attack") {
    check_keys(a, {"action", "targets", "k", "peak", "osc", "freq", "ramp",
                   "horizon", "dt", "mode"},
               where);
    DynamicAttackAction d;
    d.targets = parse_targets(a, where);
    d.spec.peak_delta = a.value("peak", d.spec.peak_delta);
    d.spec.oscillation_ratio = a.value("osc", d.spec.oscillation_ratio);
    d.spec.frequency_hz = a.value("freq", d.spec.frequency_hz);
    d.spec.ramp_duration_s = a.value("ramp", d.spec.ramp_duration_s);
    d.spec.horizon_s = a.value("horizon", d.spec.horizon_s);
    d.spec.time_step_s = a.value("dt", d.spec.time_step_s);
    const auto mode = a.value("mode", std::string("multiplicative"));
    if (mode == "multiplicative") {
      d.spec.mode = OscillationMode::kMultiplicative;
    } else if (mode == "additive") {
      d.spec.mode = OscillationMode::kAdditive;
    } else {
      throw ScenarioError(where + ": mode must be multiplicative or additive");
    }
    validate_dynamic_attack(d.spec);
    return d;
  }
  if (type == "optimize-dg") {
    check_keys(a, {"action", "swarm", "iters", "seed", "inertia", "cognitive",
                   "social", "velocity_clamp", "weights", "use_result"},
               where);
    OptimizeDgAction o;
    o.config.swarm_size = a.value("swarm", o.config.swarm_size);
    o.config.iterations = a.value("iters", o.config.iterations);
    o.config.seed = a.value("seed", o.config.seed);
    o.config.inertia = a.value("inertia", o.config.inertia);
    o.config.cognitive = a.value("cognitive", o.config.cognitive);
    o.config.social = a.value("social", o.config.social);
    o.config.velocity_clamp = a.value("velocity_clamp", o.config.velocity_clamp);
    if (a.contains("weights")) o.weights = parse_weights(a.at("weights"));
    o.use_result = a.value("use_result", o.use_result);
    validate_config(o.config);
    return o;
  }
  throw ScenarioError(where + ": unknown action '" + type + "'");
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join_ids(const std::vector<BusId>& ids, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(ids[i]);
  }
  return out;
}

std::string pct_label(double delta) {
  return csv::num(std::round(delta * 100.0 * 1e6) / 1e6) + "pct";
}

class BundleWriter {
 public:
  explicit BundleWriter(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ScenarioError("cannot write artifact " + name);
    out << content;
    out.close();
    records_.push_back({name, sha256_hex(content), content.size()});
  }

  const std::vector<ArtifactRecord>& records() const { return records_; }

 private:
  fs::path dir_;
  std::vector<ArtifactRecord> records_;
};

class Runner {
 public:
  Runner(const Scenario& scenario, NetworkCase net, BundleWriter& writer)
      : scenario_(scenario), net_(std::move(net)), writer_(writer) {}

  void run(std::size_t index, const ScenarioAction& action) {
    char prefix[8];
    std::snprintf(prefix, sizeof(prefix), "%02zu_", index + 1);
    prefix_ = prefix;
    std::visit([this](const auto& a) { this->apply(a); }, action);
  }

  std::vector<SummaryRow>& summary() { return summary_; }

 private:
  std::vector<BusId> resolve(const TargetSelection& sel) const {
    if (sel.critical_k == 0) return sel.buses;
    const PowerFlowSolution sol = solve(net_);
    if (!sol.converged) throw ConvergenceError("base solve did not converge");
    return select_critical(rank_vm(sol), sel.critical_k);
  }

  void apply(const SolveAction& a) {
    const PowerFlowSolution sol = solve(net_);
    std::ostringstream buses, branches;
    write_bus_csv(buses, sol);
    write_branch_csv(branches, sol);
    const std::string stem = prefix_ + "solve" + (a.label.empty() ? "" : "_" + a.label);
    writer_.write(stem + "_buses.csv", buses.str());
    writer_.write(stem + "_branches.csv", branches.str());
    summary_.push_back(make_summary_row(sol, net_.dg_units.size(), {}, 0.0));
  }

  void apply(const RankAction& a) {
    const PowerFlowSolution sol = solve(net_);
    if (!sol.converged) throw ConvergenceError("rank solve did not converge");
    const CriticalityRanking ranking = rank_vm(sol);
    select_critical(ranking, a.k);  // range check on k
    std::ostringstream out;
    out << "rank,bus_id,v_pu,critical\n";
    for (const auto& e : ranking.entries) {
      out << e.rank << ',' << e.bus << ',' << csv::num(e.vm) << ','
          << (static_cast<std::size_t>(e.rank) <= a.k ? 1 : 0) << '\n';
    }
    writer_.write(prefix_ + "rank.csv", out.str());
  }

  void apply(const StepAttackAction& a) {
    const auto targets = resolve(a.targets);
    std::ostringstream table;
    table << "attacked_nodes,load_increase_pct,p_loss_kw,q_loss_kvar,"
             "delta_p_loss_kw,delta_q_loss_kvar,min_v_pu,min_v_bus,breach\n";
    std::vector<StepAttackResult> results;
    for (double delta : a.deltas) {
      results.push_back(run_step_attack(net_, {targets, delta}));
      const auto& r = results.back();
      const LimitReport limits = check_limits(r.attacked, scenario_.profile.band);
      table << join_ids(targets, " ") << ',' << csv::num(delta * 100.0) << ','
            << csv::num(r.attacked_losses.p_kw) << ','
            << csv::num(r.attacked_losses.q_kvar) << ','
            << csv::num(r.delta_p_loss_kw()) << ','
            << csv::num(r.delta_q_loss_kvar()) << ',' << csv::num(limits.v_min)
            << ',' << limits.min_bus << ',' << (limits.breach ? 1 : 0) << '\n';
      summary_.push_back(
          make_summary_row(r.attacked, net_.dg_units.size(), targets, delta));
    }
    writer_.write(prefix_ + "step_attack.csv", table.str());

    // plot-ready voltage profiles: baseline plus one column per delta
    std::ostringstream profiles;
    profiles << "bus_id,v_base_pu";
    for (double delta : a.deltas) profiles << ",v_" << pct_label(delta);
    profiles << '\n';
    const auto& base = results.front().baseline;
    for (std::size_t i = 0; i < base.bus_ids.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      profiles << base.bus_ids[i] << ',' << csv::num(std::abs(base.voltages[idx]));
      for (const auto& r : results) {
        profiles << ',' << csv::num(std::abs(r.attacked.voltages[idx]));
      }
      profiles << '\n';
    }
    writer_.write(prefix_ + "step_attack_profiles.csv", profiles.str());
  }

  void apply(const DynamicAttackAction& a) {
    DynamicAttackSpec spec = a.spec;
    spec.targets = resolve(a.targets);
    const TimeSeriesResult ts = run_time_series(net_, spec, scenario_.profile.band);
    std::ostringstream series, voltages;
    write_timeseries_csv(series, ts);
    write_timeseries_voltages_csv(voltages, ts);
    writer_.write(prefix_ + "timeseries.csv", series.str());
    writer_.write(prefix_ + "timeseries_voltages.csv", voltages.str());

    json doc = {{"targets", spec.targets},
                {"peak_delta", spec.peak_delta},
                {"oscillation_ratio", spec.oscillation_ratio},
                {"frequency_hz", spec.frequency_hz},
                {"ramp_duration_s", spec.ramp_duration_s},
                {"horizon_s", spec.horizon_s},
                {"time_step_s", spec.time_step_s},
                {"mode", spec.mode == OscillationMode::kAdditive ? "additive"
                                                                 : "multiplicative"},
                {"n_dgs", net_.dg_units.size()},
                {"band_min_pu", scenario_.profile.band.v_min},
                {"global_min_v_pu", ts.global_min},
                {"first_breach_s", ts.first_breach_t ? json(*ts.first_breach_t)
                                                     : json(nullptr)}};
    writer_.write(prefix_ + "dynamic_attack.json", doc.dump(2) + "\n");
  }

  void apply(const OptimizeDgAction& a) {
    ObjectiveWeights weights = a.weights;
    weights.band = scenario_.profile.band;
    const OptimizationResult result = pso_optimize(net_, weights, a.config);
    writer_.write(prefix_ + "optimization.json",
                  optimization_report_json(net_, result) + "\n");
    if (a.use_result) net_ = apply_dg(net_, result.best_placement);
  }

  const Scenario& scenario_;
  NetworkCase net_;
  BundleWriter& writer_;
  std::vector<SummaryRow> summary_;
  std::string prefix_;
};

}  // namespace

Scenario parse_scenario(const std::string& json_text, const fs::path& base_dir) {
  Scenario sc;
  sc.base_dir = base_dir;
  try {
    const json doc = json::parse(json_text);
    check_keys(doc, {"name", "description", "case", "profile", "actions", "output_dir"},
               "scenario");
    sc.name = doc.value("name", std::string("scenario"));
    if (!doc.contains("case")) throw ScenarioError("scenario needs a 'case'");
    sc.case_ref = doc.at("case").get<std::string>();
    sc.output_dir = doc.value("output_dir", std::string{});
    if (doc.contains("profile")) {
      const json& p = doc.at("profile");
      check_keys(p, {"slack_voltage_pu", "band_min_pu", "band_max_pu"}, "profile");
      if (p.contains("slack_voltage_pu")) {
        sc.profile.slack_voltage_pu = p.at("slack_voltage_pu").get<double>();
      }
      sc.profile.band.v_min = p.value("band_min_pu", sc.profile.band.v_min);
      sc.profile.band.v_max = p.value("band_max_pu", sc.profile.band.v_max);
      validate_band(sc.profile.band);
    }
    const json actions = doc.value("actions", json::array());
    for (std::size_t i = 0; i < actions.size(); ++i) {
      sc.actions.push_back(parse_action(actions[i], i));
    }
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario parse failure: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  return sc;
}

Scenario load_scenario(const fs::path& path) {
  return parse_scenario(read_file(path), path.parent_path());
}

fs::path bundled_case_dir() {
  if (const char* env = std::getenv("GRIDRES_CASES_DIR"); env && *env) return env;
  return fs::path(GRIDRES_DATA_DIR) / "cases";
}

NetworkCase resolve_case(const std::string& ref, const fs::path& base_dir) {
  const fs::path p(ref);
  if (!p.has_parent_path() && p.extension() != ".json") {
    return load_case(bundled_case_dir() / (ref + ".json"));
  }
  if (p.is_relative() && !base_dir.empty() && fs::exists(base_dir / p)) {
    return load_case(base_dir / p);
  }
  return load_case(p);
}

SummaryRow make_summary_row(const PowerFlowSolution& solution, std::size_t n_dgs,
                            std::vector<BusId> attacked, double delta) {
  const LossTotals loss = total_losses(solution);
  SummaryRow row;
  row.attacked = std::move(attacked);
  row.n_dgs = n_dgs;
  row.load_increase_pct = delta * 100.0;
  row.real_pl_kw = loss.p_kw;
  row.reactive_pl_kvar = loss.q_kvar;
  row.lowest_v_pu = solution.magnitudes().minCoeff();
  return row;
}

void emit_summary_table(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "attacked_nodes,n_dgs,load_increase_pct,real_pl_kw,reactive_pl_kvar,"
         "lowest_v_pu\n";
  for (const auto& r : rows) {
    out << (r.attacked.empty() ? std::string("none") : join_ids(r.attacked, " "))
        << ',' << r.n_dgs << ',' << csv::num(r.load_increase_pct) << ','
        << csv::num(r.real_pl_kw) << ',' << csv::num(r.reactive_pl_kvar) << ','
        << csv::num(r.lowest_v_pu) << '\n';
  }
}

ReportBundle run_scenario(const Scenario& scenario, const std::string& scenario_text,
                          const std::optional<fs::path>& output_dir) {
  ReportBundle bundle;
  const std::string started = utc_now();
  fs::path target = output_dir ? *output_dir
                    : !scenario.output_dir.empty()
                        ? fs::path(scenario.output_dir)
                        : fs::path("bundles") / scenario.name;
  if (target.is_relative() && !output_dir && !scenario.output_dir.empty() &&
      !scenario.base_dir.empty()) {
    target = scenario.base_dir / target;
  }
  target = fs::absolute(target).lexically_normal();
  if (target.filename().empty()) target = target.parent_path();
  bundle.directory = target;
  bundle.scenario_hash = sha256_hex(scenario_text);

  fs::create_directories(target.parent_path());
  const fs::path staging =
      target.parent_path() /
      ("." + target.filename().string() + ".tmp-" + std::to_string(::getpid()));
  fs::remove_all(staging);
  fs::create_directories(staging);

  BundleWriter writer(staging);
  json error = nullptr;
  NetworkCase net;
  try {
    net = resolve_case(scenario.case_ref, scenario.base_dir);
    if (scenario.profile.slack_voltage_pu) {
      net.slack_voltage_pu = *scenario.profile.slack_voltage_pu;
      validate_case(net);
    }
    bundle.case_hash = sha256_hex(case_to_json(net));
  } catch (const std::exception& e) {
    error = {{"action_index", 0}, {"action", "load-case"}, {"message", e.what()}};
  }

  if (error.is_null()) {
    Runner runner(scenario, net, writer);
    static constexpr const char* kNames[] = {"solve", "rank", "step-attack",
                                             "dynamic-attack", "optimize-dg"};
    for (std::size_t i = 0; i < scenario.actions.size(); ++i) {
      try {
        runner.run(i, scenario.actions[i]);
      } catch (const std::exception& e) {
        error = {{"action_index", i + 1},
                 {"action", kNames[scenario.actions[i].index()]},
                 {"message", e.what()}};
        break;
      }
    }
    bundle.summary = runner.summary();
    if (!scenario.actions.empty()) {
      std::ostringstream table;
      emit_summary_table(table, bundle.summary);
      writer.write("summary.csv", table.str());
    }
  }

  bundle.artifacts = writer.records();
  bundle.ok = error.is_null();
  if (!bundle.ok) bundle.error = error.at("message").get<std::string>();

  json artifacts = json::array();
  for (const auto& a : bundle.artifacts) {
    artifacts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  }
  json manifest = {{"tool", "gridres"},
                   {"tool_version", GRIDRES_VERSION},
                   {"scenario", scenario.name},
                   {"scenario_hash", bundle.scenario_hash},
                   {"case", scenario.case_ref},
                   {"case_hash", bundle.case_hash},
                   {"status", bundle.ok ? "ok" : "error"},
                   {"artifacts", artifacts},
                   {"timestamps", {{"started_at", started}, {"finished_at", utc_now()}}}};
  if (!bundle.ok) manifest["error"] = error;
  {
    std::ofstream out(staging / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
  }

  fs::remove_all(target);
  fs::rename(staging, target);
  return bundle;
}

ReportBundle run_scenario(const fs::path& scenario_path,
                          const std::optional<fs::path>& output_dir) {
  const std::string text = read_file(scenario_path);
  return run_scenario(parse_scenario(text, scenario_path.parent_path()), text,
                      output_dir);
}

bool verify_bundle(const fs::path& directory) {
  const json manifest = json::parse(read_file(directory / "manifest.json"));
  for (const auto& a : manifest.at("artifacts")) {
    const fs::path p = directory / a.at("path").get<std::string>();
    if (!fs::exists(p)) return false;
    if (sha256_hex(read_file(p)) != a.at("sha256").get<std::string>()) return false;
  }
  return true;
}

}  // namespace gridres
