// Backward/forward sweep load flow for radial feeders, loss accounting,
// voltage-magnitude criticality ranking and voltage-band checks.
#pragma once

#include <complex>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gridres/netmodel.hpp"

namespace gridres {

/// Raised when a converged solution is required but not supplied.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolveOptions {
  double tolerance = 1e-6;  // max per-bus voltage change, p.u.
  int max_iterations = 100;
};

struct BranchResult {
  std::size_t branch_index = 0;  // position in NetworkCase::branches
  BusId from_bus = 0;
  BusId to_bus = 0;
  std::complex<double> flow_pu;  // sending-end complex power
  double p_loss_kw = 0.0;
  double q_loss_kvar = 0.0;
};

struct PowerFlowSolution {
  std::vector<BusId> bus_ids;
  BusId slack_id = 0;
  Eigen::VectorXcd voltages;
  /// One entry per non-slack bus, in case bus order; entry for the bus's
  /// parent branch.
  std::vector<BranchResult> branches;
  /// Per bus index: position in `branches` of the parent branch, -1 at slack.
  std::vector<std::ptrdiff_t> parent_entry;

  std::complex<double> slack_injection_pu;
  std::complex<double> load_pu;
  std::complex<double> generation_pu;
  double s_base_mva = 0.0;

  int iterations = 0;
  double max_mismatch = 0.0;
  double tolerance = 0.0;
  bool converged = false;

  std::size_t index_of(BusId id) const;
  double vm(BusId id) const { return std::abs(voltages[static_cast<Eigen::Index>(index_of(id))]); }
  Eigen::VectorXd magnitudes() const { return voltages.cwiseAbs(); }
};

PowerFlowSolution solve(const NetworkCase& net, const SolveOptions& options = {});

struct LossTotals {
  double p_kw = 0.0;
  double q_kvar = 0.0;
};

LossTotals total_losses(const PowerFlowSolution& solution);

/// Loss on the parent branch of `bus`.
LossTotals branch_loss_at(const PowerFlowSolution& solution, BusId bus);

/// slack + DG - load - losses, worst of the real and reactive parts, p.u.
double power_balance_residual(const PowerFlowSolution& solution);

struct RankEntry {
  BusId bus = 0;
  double vm = 0.0;
  int rank = 0;  // 1 = lowest voltage
};

struct CriticalityRanking {
  std::vector<RankEntry> entries;
};

/// Non-slack buses ascending by voltage magnitude, ties by bus id.
CriticalityRanking rank_vm(const PowerFlowSolution& solution);

std::vector<BusId> select_critical(const CriticalityRanking& ranking,
                                   std::size_t k);

struct VoltageBand {
  double v_min = 0.917;
  double v_max = 1.042;
};

void validate_band(const VoltageBand& band);

struct LimitViolation {
  BusId bus = 0;
  double vm = 0.0;
  bool below = true;
};

struct LimitReport {
  std::vector<LimitViolation> violations;
  double v_min = 0.0;
  double v_max = 0.0;
  BusId min_bus = 0;
  BusId max_bus = 0;
  bool breach = false;
};

LimitReport check_limits(const PowerFlowSolution& solution,
                         const VoltageBand& band = {});

/// bus_id,v_pu,angle_deg
void write_bus_csv(std::ostream& out, const PowerFlowSolution& solution);
/// branch_id,from,to,p_loss_kw,q_loss_kvar
void write_branch_csv(std::ostream& out, const PowerFlowSolution& solution);

}  // namespace gridres
