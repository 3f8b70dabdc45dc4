// Radial feeder data model: buses, branches, DG units, case files and
// per-unit conversion. Every modifying operation returns a new case.
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gridres {

using BusId = int;

/// Malformed or inconsistent case data.
class CaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The in-service branch set is not a tree rooted at the slack bus.
class TopologyError : public CaseError {
 public:
  using CaseError::CaseError;
};

struct Bus {
  BusId id = 0;
  double p_load_kw = 0.0;
  double q_load_kvar = 0.0;
  bool is_slack = false;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  BusId from_bus = 0;
  BusId to_bus = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
  bool in_service = true;

  bool operator==(const Branch&) const = default;
};

inline constexpr double kDgMinKw = 100.0;
inline constexpr double kDgMaxKw = 5000.0;

/// Fixed real-power injection at unity power factor.
struct DgUnit {
  BusId bus = 0;
  double p_kw = 0.0;
  double q_kvar = 0.0;

  bool operator==(const DgUnit&) const = default;
};

/// Three DG units with distinct, non-slack buses.
struct DgPlacement {
  std::array<DgUnit, 3> units{};

  bool operator==(const DgPlacement&) const = default;
};

struct NetworkCase {
  std::string name;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  double v_base_kv = 12.66;
  double s_base_mva = 10.0;
  double slack_voltage_pu = 1.0;
  std::vector<DgUnit> dg_units;

  bool operator==(const NetworkCase&) const = default;

  bool has_bus(BusId id) const;
  /// Position of `id` in `buses`; throws CaseError when absent.
  std::size_t index_of(BusId id) const;
  BusId slack_id() const;
  double total_p_load_kw() const;
  double total_q_load_kvar() const;
};

/// Parent map and traversal order of a radial case.
///
/// `order` lists bus indices slack-first so that every bus appears after its
/// parent; reversing it gives a valid leaf-to-root accumulation order.
struct RadialOrder {
  std::size_t slack_index = 0;
  std::map<BusId, std::size_t> parent_branch;  // bus id -> index into branches
  std::vector<std::size_t> order;
  std::vector<std::ptrdiff_t> parent_bus;      // per bus index, -1 at slack
  std::vector<std::ptrdiff_t> parent_branch_of;  // per bus index, -1 at slack
  std::vector<int> depth;
};

RadialOrder validate_radial(const NetworkCase& net);

/// Field-level checks (unique ids, single slack, bases, impedances, DG
/// bounds) followed by validate_radial.
RadialOrder validate_case(const NetworkCase& net);

NetworkCase parse_case(const std::string& json_text);
NetworkCase load_case(const std::filesystem::path& path);
std::string case_to_json(const NetworkCase& net);
void save_case(const NetworkCase& net, const std::filesystem::path& path);

/// Loads at `targets` multiplied by (1 + multiplier); other buses untouched.
NetworkCase scale_loads(const NetworkCase& net, std::span<const BusId> targets,
                        double multiplier);

NetworkCase apply_dg(const NetworkCase& net, std::span<const DgUnit> units);
NetworkCase apply_dg(const NetworkCase& net, const DgPlacement& placement);
NetworkCase remove_dg(const NetworkCase& net, BusId bus);

void validate_dg_unit(const NetworkCase& net, const DgUnit& unit);

inline double base_impedance_ohm(double v_base_kv, double s_base_mva) {
  return v_base_kv * v_base_kv / s_base_mva;
}

/// Per-unit view of a case. Branch and bus vectors follow the case order.
struct PerUnitCase {
  double v_base_kv = 0.0;
  double s_base_mva = 0.0;
  double z_base_ohm = 0.0;
  double slack_voltage = 1.0;
  Eigen::VectorXcd branch_z;     // r + jx
  Eigen::VectorXcd load;         // P + jQ demand
  Eigen::VectorXcd generation;   // DG injection summed per bus

  Eigen::VectorXcd net_load() const { return load - generation; }
};

PerUnitCase to_per_unit(const NetworkCase& net);

/// Restores physical quantities from `pu` onto a copy of `topology`.
/// DG units keep their bus assignment from `topology` and take their size
/// from the per-bus generation totals.
NetworkCase from_per_unit(const PerUnitCase& pu, const NetworkCase& topology);

}  // namespace gridres
