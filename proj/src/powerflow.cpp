#include "gridres/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "csv.hpp"

namespace gridres {

std::size_t PowerFlowSolution::index_of(BusId id) const {
  auto it = std::find(bus_ids.begin(), bus_ids.end(), id);
  if (it == bus_ids.end()) {
    throw std::out_of_range("bus " + std::to_string(id) + " not in solution");
  }
  return static_cast<std::size_t>(it - bus_ids.begin());
}

namespace {

// Accumulates injected currents leaf-to-root; returns per-bus branch currents
// (current through the parent branch of each bus).
Eigen::VectorXcd branch_currents(const RadialOrder& tree,
                                 const Eigen::VectorXcd& net_load,
                                 const Eigen::VectorXcd& v) {
  Eigen::VectorXcd j = (net_load.array() / v.array()).conjugate();
  j[static_cast<Eigen::Index>(tree.slack_index)] = 0.0;
  for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
    const auto parent = tree.parent_bus[*it];
    if (parent >= 0 && static_cast<std::size_t>(parent) != tree.slack_index) {
      j[parent] += j[static_cast<Eigen::Index>(*it)];
    }
  }
  return j;
}

}  // namespace

PowerFlowSolution solve(const NetworkCase& net, const SolveOptions& options) {
  if (!(options.tolerance > 0.0)) {
    throw std::invalid_argument("solver tolerance must be positive");
  }
  if (options.max_iterations < 1) {
    throw std::invalid_argument("max_iterations must be at least 1");
  }
  const RadialOrder tree = validate_radial(net);
  const PerUnitCase pu = to_per_unit(net);
  const Eigen::VectorXcd s_net = pu.net_load();
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  const auto slack = static_cast<Eigen::Index>(tree.slack_index);

  auto z_of = [&](std::size_t bus) {
    return pu.branch_z[tree.parent_branch_of[bus]];
  };

  PowerFlowSolution sol;
  sol.s_base_mva = net.s_base_mva;
  sol.tolerance = options.tolerance;
  sol.slack_id = net.buses[tree.slack_index].id;
  sol.bus_ids.reserve(net.buses.size());
  for (const auto& b : net.buses) sol.bus_ids.push_back(b.id);

  Eigen::VectorXcd v =
      Eigen::VectorXcd::Constant(n, std::complex<double>(pu.slack_voltage, 0.0));
  Eigen::VectorXcd next = v;
  double change = 0.0;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXcd j = branch_currents(tree, s_net, v);
    for (std::size_t bus : tree.order) {
      if (bus == tree.slack_index) continue;
      next[static_cast<Eigen::Index>(bus)] =
          next[tree.parent_bus[bus]] - z_of(bus) * j[static_cast<Eigen::Index>(bus)];
    }
    change = (next - v).cwiseAbs().maxCoeff();
    v = next;
    sol.iterations = iter;
    if (!std::isfinite(change) || v.cwiseAbs().minCoeff() < 1e-6) {
      change = std::numeric_limits<double>::infinity();
      break;
    }
    if (change < options.tolerance) break;
  }
  sol.max_mismatch = change;
  sol.converged = std::isfinite(change) && change < options.tolerance;
  sol.voltages = v;

  const Eigen::VectorXcd j = branch_currents(tree, s_net, v);
  const double s_base_kva = net.s_base_mva * 1000.0;
  sol.parent_entry.assign(net.buses.size(), -1);
  sol.branches.reserve(net.buses.size() - 1);
  for (std::size_t bus = 0; bus < net.buses.size(); ++bus) {
    if (bus == tree.slack_index) continue;
    const auto k = static_cast<std::size_t>(tree.parent_branch_of[bus]);
    const auto jb = j[static_cast<Eigen::Index>(bus)];
    const std::complex<double> loss = pu.branch_z[static_cast<Eigen::Index>(k)] * std::norm(jb);
    BranchResult br;
    br.branch_index = k;
    br.from_bus = net.buses[static_cast<std::size_t>(tree.parent_bus[bus])].id;
    br.to_bus = net.buses[bus].id;
    br.flow_pu = v[tree.parent_bus[bus]] * std::conj(jb);
    br.p_loss_kw = loss.real() * s_base_kva;
    br.q_loss_kvar = loss.imag() * s_base_kva;
    sol.parent_entry[bus] = static_cast<std::ptrdiff_t>(sol.branches.size());
    sol.branches.push_back(br);
    if (tree.parent_bus[bus] == slack) sol.slack_injection_pu += br.flow_pu;
  }
  sol.load_pu = pu.load.sum();
  sol.generation_pu = pu.generation.sum();
  return sol;
}

LossTotals total_losses(const PowerFlowSolution& solution) {
  if (!solution.converged) {
    throw ConvergenceError("losses requested from an unconverged solution");
  }
  LossTotals sum;
  for (const auto& br : solution.branches) {
    sum.p_kw += br.p_loss_kw;
    sum.q_kvar += br.q_loss_kvar;
  }
  return sum;
}

LossTotals branch_loss_at(const PowerFlowSolution& solution, BusId bus) {
  if (!solution.converged) {
    throw ConvergenceError("losses requested from an unconverged solution");
  }
  const auto entry = solution.parent_entry[solution.index_of(bus)];
  if (entry < 0) {
    throw std::invalid_argument("slack bus has no parent branch");
  }
  const auto& br = solution.branches[static_cast<std::size_t>(entry)];
  return {br.p_loss_kw, br.q_loss_kvar};
}

double power_balance_residual(const PowerFlowSolution& solution) {
  std::complex<double> loss;
  const double s_base_kva = solution.s_base_mva * 1000.0;
  for (const auto& br : solution.branches) {
    loss += std::complex<double>(br.p_loss_kw, br.q_loss_kvar) / s_base_kva;
  }
  const auto r = solution.slack_injection_pu + solution.generation_pu -
                 solution.load_pu - loss;
  return std::max(std::abs(r.real()), std::abs(r.imag()));
}

CriticalityRanking rank_vm(const PowerFlowSolution& solution) {
  CriticalityRanking ranking;
  for (std::size_t i = 0; i < solution.bus_ids.size(); ++i) {
    if (solution.bus_ids[i] == solution.slack_id) continue;
    ranking.entries.push_back(
        {solution.bus_ids[i], std::abs(solution.voltages[static_cast<Eigen::Index>(i)]), 0});
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const RankEntry& a, const RankEntry& b) {
              if (a.vm != b.vm) return a.vm < b.vm;
              return a.bus < b.bus;
            });
  for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
    ranking.entries[r].rank = static_cast<int>(r + 1);
  }
  return ranking;
}

std::vector<BusId> select_critical(const CriticalityRanking& ranking,
                                   std::size_t k) {
  if (k < 1 || k > ranking.entries.size()) {
    throw std::out_of_range("k must lie in [1, " +
                            std::to_string(ranking.entries.size()) + "]");
  }
  std::vector<BusId> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) out.push_back(ranking.entries[r].bus);
  return out;
}

void validate_band(const VoltageBand& band) {
  if (!(band.v_min < band.v_max)) {
    throw std::invalid_argument("voltage band requires v_min < v_max");
  }
}

LimitReport check_limits(const PowerFlowSolution& solution,
                         const VoltageBand& band) {
  validate_band(band);
  LimitReport report;
  const Eigen::VectorXd vm = solution.magnitudes();
  Eigen::Index lo = 0;
  Eigen::Index hi = 0;
  report.v_min = vm.minCoeff(&lo);
  report.v_max = vm.maxCoeff(&hi);
  report.min_bus = solution.bus_ids[static_cast<std::size_t>(lo)];
  report.max_bus = solution.bus_ids[static_cast<std::size_t>(hi)];
  for (Eigen::Index i = 0; i < vm.size(); ++i) {
    if (vm[i] < band.v_min || vm[i] > band.v_max) {
      report.violations.push_back(
          {solution.bus_ids[static_cast<std::size_t>(i)], vm[i], vm[i] < band.v_min});
    }
  }
  report.breach = !report.violations.empty();
  return report;
}

void write_bus_csv(std::ostream& out, const PowerFlowSolution& solution) {
  out << "bus_id,v_pu,angle_deg\n";
  for (std::size_t i = 0; i < solution.bus_ids.size(); ++i) {
    const auto v = solution.voltages[static_cast<Eigen::Index>(i)];
    out << solution.bus_ids[i] << ',' << csv::num(std::abs(v)) << ','
        << csv::num(std::arg(v) * 180.0 / std::numbers::pi) << '\n';
  }
}

void write_branch_csv(std::ostream& out, const PowerFlowSolution& solution) {
  out << "branch_id,from,to,p_loss_kw,q_loss_kvar\n";
  for (const auto& br : solution.branches) {
    out << br.branch_index + 1 << ',' << br.from_bus << ',' << br.to_bus << ','
        << csv::num(br.p_loss_kw) << ',' << csv::num(br.q_loss_kvar) << '\n';
  }
}

}  // namespace gridres
