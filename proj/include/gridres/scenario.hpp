// Scenario files and report bundles: ordered solve / rank / attack /
// optimize actions executed against one case, with hashed artifacts.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gridres/attacks.hpp"
#include "gridres/dgopt.hpp"
#include "gridres/netmodel.hpp"
#include "gridres/powerflow.hpp"

namespace gridres {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit bus list, or (critical_k > 0) the k lowest-VM buses of the case
/// the action runs against.
struct TargetSelection {
  std::vector<BusId> buses;
  std::size_t critical_k = 0;
};

struct SolveAction {
  std::string label;
};

struct RankAction {
  std::size_t k = 3;
};

struct StepAttackAction {
  TargetSelection targets;
  std::vector<double> deltas;
};

struct DynamicAttackAction {
  TargetSelection targets;
  DynamicAttackSpec spec;
};

struct OptimizeDgAction {
  PsoConfig config;
  ObjectiveWeights weights;
  bool use_result = true;  // later actions see the DG-augmented case
};

using ScenarioAction = std::variant<SolveAction, RankAction, StepAttackAction,
                                    DynamicAttackAction, OptimizeDgAction>;

struct ScenarioProfile {
  std::optional<double> slack_voltage_pu;
  VoltageBand band;
};

struct Scenario {
  std::string name;
  std::string case_ref;
  ScenarioProfile profile;
  std::vector<ScenarioAction> actions;
  std::string output_dir;
  std::filesystem::path base_dir;  // relative paths resolve against this
};

Scenario parse_scenario(const std::string& json_text,
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

std::filesystem::path bundled_case_dir();

/// A bundled case name ("ieee33") or a path to a case file.
NetworkCase resolve_case(const std::string& ref,
                         const std::filesystem::path& base_dir = {});

/// One row of the attack-impact summary.
struct SummaryRow {
  std::vector<BusId> attacked;
  std::size_t n_dgs = 0;
  double load_increase_pct = 0.0;
  double real_pl_kw = 0.0;
  double reactive_pl_kvar = 0.0;
  double lowest_v_pu = 0.0;
};

/// Throws ConvergenceError for an unconverged solution.
SummaryRow make_summary_row(const PowerFlowSolution& solution, std::size_t n_dgs,
                            std::vector<BusId> attacked, double delta);

/// attacked_nodes,n_dgs,load_increase_pct,real_pl_kw,reactive_pl_kvar,lowest_v_pu
void emit_summary_table(std::ostream& out, std::span<const SummaryRow> rows);

struct ArtifactRecord {
  std::string path;  // relative to the bundle directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct ReportBundle {
  std::filesystem::path directory;
  std::string case_hash;
  std::string scenario_hash;
  std::vector<ArtifactRecord> artifacts;
  std::vector<SummaryRow> summary;
  bool ok = true;
  std::string error;
};

/// Runs every action in order and writes the bundle atomically (temporary
/// directory, then rename). An action failure stops the run; the bundle then
/// holds the artifacts written so far and a manifest with status "error".
ReportBundle run_scenario(const Scenario& scenario, const std::string& scenario_text,
                          const std::optional<std::filesystem::path>& output_dir = {});
ReportBundle run_scenario(const std::filesystem::path& scenario_path,
                          const std::optional<std::filesystem::path>& output_dir = {});

/// Recomputes every artifact hash listed in the bundle manifest.
bool verify_bundle(const std::filesystem::path& directory);

}  // namespace gridres
