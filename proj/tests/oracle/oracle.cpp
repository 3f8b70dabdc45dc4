#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridres::oracle {

using cd = std::complex<double>;

NewtonResult newton_raphson(const NetworkCase& net, double tolerance,
                            int max_iterations) {
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  const double z_base = base_impedance_ohm(net.v_base_kv, net.s_base_mva);
  const double s_base_kva = net.s_base_mva * 1000.0;

  Eigen::MatrixXcd ybus = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : net.branches) {
    if (!br.in_service) continue;
    const auto f = static_cast<Eigen::Index>(net.index_of(br.from_bus));
    const auto t = static_cast<Eigen::Index>(net.index_of(br.to_bus));
    const cd y = 1.0 / (cd(br.r_ohm, br.x_ohm) / z_base);
    ybus(f, f) += y;
    ybus(t, t) += y;
    ybus(f, t) -= y;
    ybus(t, f) -= y;
  }

  Eigen::VectorXcd s_spec = Eigen::VectorXcd::Zero(n);
  std::vector<Eigen::Index> pq;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = net.buses[static_cast<std::size_t>(i)];
    s_spec[i] = -cd(b.p_load_kw, b.q_load_kvar) / s_base_kva;
    if (!b.is_slack) pq.push_back(i);
  }
  for (const auto& u : net.dg_units) {
    s_spec[static_cast<Eigen::Index>(net.index_of(u.bus))] += cd(u.p_kw, u.q_kvar) / s_base_kva;
  }

  Eigen::VectorXd vm = Eigen::VectorXd::Constant(n, net.slack_voltage_pu);
  Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
  const auto m = static_cast<Eigen::Index>(pq.size());

  auto voltage = [&] {
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
    return v;
  };

  NewtonResult out;
  for (int iter = 0; iter <= max_iterations; ++iter) {
    const Eigen::VectorXcd v = voltage();
    const Eigen::VectorXcd ibus = ybus * v;
    const Eigen::VectorXcd s_calc = v.cwiseProduct(ibus.conjugate());
    Eigen::VectorXd f(2 * m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const cd mis = s_calc[pq[k]] - s_spec[pq[k]];
      f[k] = mis.real();
      f[m + k] = mis.imag();
    }
    out.iterations = iter;
    if (m == 0 || f.cwiseAbs().maxCoeff() < tolerance) {
      out.converged = true;
      break;
    }
    if (iter == max_iterations) break;

    // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
    // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
    const Eigen::VectorXcd vnorm = v.cwiseQuotient(vm.cast<cd>());
    Eigen::MatrixXcd ds_dva = -(ybus * v.asDiagonal()).conjugate();
    ds_dva.diagonal() += ibus.conjugate();
    ds_dva = cd(0.0, 1.0) * (v.asDiagonal() * ds_dva);
    Eigen::MatrixXcd ds_dvm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate();
    ds_dvm.diagonal() += ibus.conjugate().cwiseProduct(vnorm);

    Eigen::MatrixXd jac(2 * m, 2 * m);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < m; ++c) {
        jac(r, c) = ds_dva(pq[r], pq[c]).real();
        jac(r, m + c) = ds_dvm(pq[r], pq[c]).real();
        jac(m + r, c) = ds_dva(pq[r], pq[c]).imag();
        jac(m + r, m + c) = ds_dvm(pq[r], pq[c]).imag();
      }
    }
    const Eigen::VectorXd dx = jac.partialPivLu().solve(-f);
    for (Eigen::Index k = 0; k < m; ++k) {
      va[pq[k]] += dx[k];
      vm[pq[k]] += dx[m + k];
    }
  }

  out.voltages = voltage();
  for (const auto& br : net.branches) {
    if (!br.in_service) continue;
    const cd z = cd(br.r_ohm, br.x_ohm) / z_base;
    const cd dv = out.voltages[static_cast<Eigen::Index>(net.index_of(br.from_bus))] -
                  out.voltages[static_cast<Eigen::Index>(net.index_of(br.to_bus))];
    const cd loss = std::norm(dv) / std::conj(z);
    out.p_loss_kw += loss.real() * s_base_kva;
    out.q_loss_kvar += loss.imag() * s_base_kva;
  }
  return out;
}

TwoBusSolution two_bus_closed_form(double v1, cd s_load, cd z) {
  const double p = s_load.real();
  const double q = s_load.imag();
  const double b = 2.0 * (p * z.real() + q * z.imag()) - v1 * v1;
  const double c = std::norm(z) * std::norm(s_load);
  const double v2sq = (-b + std::sqrt(b * b - 4.0 * c)) / 2.0;
  const double i2 = std::norm(s_load) / v2sq;
  return {std::sqrt(v2sq), i2 * z.real(), i2 * z.imag()};
}

NetworkCase two_bus_case(double p_kw, double q_kvar, double r_ohm, double x_ohm,
                         double slack_v) {
  NetworkCase net;
  net.name = "two-bus";
  net.slack_voltage_pu = slack_v;
  net.buses = {{1, 0.0, 0.0, true}, {2, p_kw, q_kvar, false}};
  net.branches = {{1, 2, r_ohm, x_ohm, true}};
  return net;
}

NetworkCase random_feeder(std::mt19937_64& rng, int n_buses) {
  std::uniform_real_distribution<double> r_ohm(0.05, 0.6);
  std::uniform_real_distribution<double> x_ohm(0.03, 0.5);
  std::uniform_real_distribution<double> p_kw(10.0, 250.0);
  std::uniform_real_distribution<double> pf(0.2, 0.8);
  std::uniform_real_distribution<double> slack_v(0.95, 1.05);
  std::bernoulli_distribution flip(0.5);

  NetworkCase net;
  net.name = "random-" + std::to_string(n_buses);
  net.slack_voltage_pu = slack_v(rng);
  // ids are a shuffled range so bus order and id order differ
  std::vector<BusId> ids(static_cast<std::size_t>(n_buses));
  for (int i = 0; i < n_buses; ++i) ids[static_cast<std::size_t>(i)] = 100 + 3 * i;
  std::shuffle(ids.begin(), ids.end(), rng);

  for (int i = 0; i < n_buses; ++i) {
    Bus b;
    b.id = ids[static_cast<std::size_t>(i)];
    b.is_slack = i == 0;
    if (!b.is_slack) {
      b.p_load_kw = p_kw(rng);
      b.q_load_kvar = b.p_load_kw * pf(rng);
    }
    net.buses.push_back(b);
  }
  for (int i = 1; i < n_buses; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    BusId a = ids[static_cast<std::size_t>(parent(rng))];
    BusId c = ids[static_cast<std::size_t>(i)];
    if (flip(rng)) std::swap(a, c);
    net.branches.push_back({a, c, r_ohm(rng), x_ohm(rng), true});
  }
  std::shuffle(net.buses.begin(), net.buses.end(), rng);
  std::shuffle(net.branches.begin(), net.branches.end(), rng);
  return net;
}

NetworkCase six_bus_toy() {
  NetworkCase net;
  net.name = "six-bus";
  net.buses = {{1, 0.0, 0.0, true},      {2, 400.0, 250.0, false},
               {3, 600.0, 300.0, false}, {4, 900.0, 500.0, false},
               {5, 350.0, 200.0, false}, {6, 700.0, 450.0, false}};
  net.branches = {{1, 2, 0.35, 0.25, true},
                  {2, 3, 0.80, 0.60, true},
                  {3, 4, 1.10, 0.90, true},
                  {2, 5, 0.70, 0.55, true},
                  {5, 6, 1.20, 0.95, true}};
  return net;
}

EnumeratedOptimum enumerate_placements(const NetworkCase& net,
                                       const ObjectiveWeights& weights,
                                       std::span<const double> grid) {
  std::vector<BusId> candidates;
  for (const auto& b : net.buses) {
    if (!b.is_slack) candidates.push_back(b.id);
  }
  EnumeratedOptimum best;
  best.objective = std::numeric_limits<double>::infinity();
  const std::size_t m = candidates.size();
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      for (std::size_t c = b + 1; c < m; ++c) {
        for (double sa : grid) {
          for (double sb : grid) {
            for (double sc : grid) {
              DgPlacement p;
              p.units = {DgUnit{candidates[a], sa, 0.0}, DgUnit{candidates[b], sb, 0.0},
                         DgUnit{candidates[c], sc, 0.0}};
              const double f = evaluate_objective(net, p, weights);
              ++best.evaluations;
              if (f < best.objective) {
                best.objective = f;
                best.placement = p;
              }
            }
          }
        }
      }
    }
  }
  return best;
}

}  // namespace gridres::oracle
