#include "gridres/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gridres {

using json = nlohmann::json;

bool NetworkCase::has_bus(BusId id) const {
  return std::any_of(buses.begin(), buses.end(),
                     [id](const Bus& b) { return b.id == id; });
}

std::size_t NetworkCase::index_of(BusId id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw CaseError("unknown bus id " + std::to_string(id));
}

BusId NetworkCase::slack_id() const {
  for (const auto& b : buses) {
    if (b.is_slack) return b.id;
  }
  throw CaseError("case has no slack bus");
}

double NetworkCase::total_p_load_kw() const {
  double sum = 0.0;
  for (const auto& b : buses) sum += b.p_load_kw;
  return sum;
}

double NetworkCase::total_q_load_kvar() const {
  double sum = 0.0;
  for (const auto& b : buses) sum += b.q_load_kvar;
  return sum;
}

RadialOrder validate_radial(const NetworkCase& net) {
  const std::size_t n = net.buses.size();
  if (n == 0) throw CaseError("case has no buses");

  std::map<BusId, std::size_t> index;
  std::ptrdiff_t slack = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!index.emplace(net.buses[i].id, i).second) {
      throw CaseError("duplicate bus id " + std::to_string(net.buses[i].id));
    }
    if (net.buses[i].is_slack) {
      if (slack >= 0) throw TopologyError("multiple slack buses");
      slack = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (slack < 0) throw CaseError("case has no slack bus");

  // adjacency over in-service branches: (neighbour index, branch index)
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    if (!br.in_service) continue;
    auto f = index.find(br.from_bus);
    auto t = index.find(br.to_bus);
    if (f == index.end() || t == index.end()) {
      throw CaseError("branch " + std::to_string(k + 1) +
                      " references an unknown bus");
    }
    if (f->second == t->second) {
      throw TopologyError("branch " + std::to_string(k + 1) + " is a self loop");
    }
    adj[f->second].emplace_back(t->second, k);
    adj[t->second].emplace_back(f->second, k);
  }

  RadialOrder out;
  out.slack_index = static_cast<std::size_t>(slack);
  out.parent_bus.assign(n, -1);
  out.parent_branch_of.assign(n, -1);
  out.depth.assign(n, -1);
  out.order.reserve(n);

  std::queue<std::size_t> frontier;
  frontier.push(out.slack_index);
  out.depth[out.slack_index] = 0;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    out.order.push_back(u);
    for (const auto& [v, k] : adj[u]) {
      if (static_cast<std::ptrdiff_t>(k) == out.parent_branch_of[u]) continue;
      if (out.depth[v] >= 0) {
        throw TopologyError("cycle detected through branch " +
                            std::to_string(net.branches[k].from_bus) + "-" +
                            std::to_string(net.branches[k].to_bus));
      }
      out.depth[v] = out.depth[u] + 1;
      out.parent_bus[v] = static_cast<std::ptrdiff_t>(u);
      out.parent_branch_of[v] = static_cast<std::ptrdiff_t>(k);
      out.parent_branch.emplace(net.buses[v].id, k);
      frontier.push(v);
    }
  }
  if (out.order.size() != n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (out.depth[i] < 0) {
        throw TopologyError("bus " + std::to_string(net.buses[i].id) +
                            " is disconnected from the slack bus");
      }
    }
  }
  return out;
}

void validate_dg_unit(const NetworkCase& net, const DgUnit& unit) {
  const std::size_t i = net.index_of(unit.bus);
  if (net.buses[i].is_slack) {
    throw CaseError("DG unit placed on slack bus " + std::to_string(unit.bus));
  }
  if (!(unit.p_kw >= kDgMinKw && unit.p_kw <= kDgMaxKw)) {
    throw CaseError("DG size " + std::to_string(unit.p_kw) + " kW at bus " +
                    std::to_string(unit.bus) + " outside [100, 5000] kW");
  }
  if (unit.q_kvar != 0.0) {
    throw CaseError("DG units operate at unity power factor");
  }
}

RadialOrder validate_case(const NetworkCase& net) {
  if (!(net.v_base_kv > 0.0) || !(net.s_base_mva > 0.0)) {
    throw CaseError("voltage and power bases must be positive");
  }
  if (!(net.slack_voltage_pu >= 0.90 && net.slack_voltage_pu <= 1.10)) {
    throw CaseError("slack voltage must lie within [0.90, 1.10] p.u.");
  }
  for (const auto& br : net.branches) {
    if (!(br.r_ohm >= 0.0) || !(br.x_ohm >= 0.0)) {
      throw CaseError("branch impedances must be non-negative");
    }
    if (br.from_bus == br.to_bus) {
      throw TopologyError("branch from_bus equals to_bus");
    }
  }
  for (const auto& b : net.buses) {
    if (!std::isfinite(b.p_load_kw) || !std::isfinite(b.q_load_kvar)) {
      throw CaseError("non-finite load at bus " + std::to_string(b.id));
    }
  }
  RadialOrder order = validate_radial(net);
  std::set<BusId> dg_buses;
  for (const auto& unit : net.dg_units) {
    validate_dg_unit(net, unit);
    if (!dg_buses.insert(unit.bus).second) {
      throw CaseError("duplicate DG unit at bus " + std::to_string(unit.bus));
    }
  }
  return order;
}

namespace {

template <typename T>
T required(const json& obj, const char* key) {
  if (!obj.contains(key)) {
    throw CaseError(std::string("missing field '") + key + "'");
  }
  return obj.at(key).get<T>();
}

}  // namespace

NetworkCase parse_case(const std::string& json_text) {
  NetworkCase net;
  try {
    const json doc = json::parse(json_text);
    net.name = doc.value("name", std::string{});
    net.v_base_kv = doc.value("v_base_kv", 12.66);
    net.s_base_mva = doc.value("s_base_mva", 10.0);
    net.slack_voltage_pu = doc.value("slack_voltage_pu", 1.0);
    for (const auto& b : required<json>(doc, "buses")) {
      net.buses.push_back({required<BusId>(b, "id"), b.value("p_load_kw", 0.0),
                           b.value("q_load_kvar", 0.0),
                           b.value("is_slack", false)});
    }
    for (const auto& br : required<json>(doc, "branches")) {
      net.branches.push_back({required<BusId>(br, "from"),
                              required<BusId>(br, "to"),
                              required<double>(br, "r_ohm"),
                              required<double>(br, "x_ohm"),
                              br.value("status", true)});
    }
    if (doc.contains("dg_units")) {
      for (const auto& u : doc.at("dg_units")) {
        net.dg_units.push_back({required<BusId>(u, "bus"),
                                required<double>(u, "p_kw"),
                                u.value("q_kvar", 0.0)});
      }
    }
  } catch (const json::exception& e) {
    throw CaseError(std::string("case parse failure: ") + e.what());
  }
  validate_case(net);
  return net;
}

NetworkCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open case file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  NetworkCase net = parse_case(text.str());
  if (net.name.empty()) net.name = path.stem().string();
  return net;
}

std::string case_to_json(const NetworkCase& net) {
  json doc;
  doc["name"] = net.name;
  doc["v_base_kv"] = net.v_base_kv;
  doc["s_base_mva"] = net.s_base_mva;
  doc["slack_voltage_pu"] = net.slack_voltage_pu;
  doc["buses"] = json::array();
  for (const auto& b : net.buses) {
    doc["buses"].push_back({{"id", b.id},
                            {"p_load_kw", b.p_load_kw},
                            {"q_load_kvar", b.q_load_kvar},
                            {"is_slack", b.is_slack}});
  }
  doc["branches"] = json::array();
  for (const auto& br : net.branches) {
    doc["branches"].push_back({{"from", br.from_bus},
                               {"to", br.to_bus},
                               {"r_ohm", br.r_ohm},
                               {"x_ohm", br.x_ohm},
                               {"status", br.in_service}});
  }
  doc["dg_units"] = json::array();
  for (const auto& u : net.dg_units) {
    doc["dg_units"].push_back(
        {{"bus", u.bus}, {"p_kw", u.p_kw}, {"q_kvar", u.q_kvar}});
  }
  return doc.dump(2);
}

void save_case(const NetworkCase& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CaseError("cannot write case file " + path.string());
  out << case_to_json(net) << '\n';
}

NetworkCase scale_loads(const NetworkCase& net, std::span<const BusId> targets,
                        double multiplier) {
  if (!(multiplier > -1.0)) {
    throw std::invalid_argument("load multiplier must exceed -1");
  }
  NetworkCase out = net;
  const double factor = 1.0 + multiplier;
  for (BusId id : targets) {
    Bus& bus = out.buses[net.index_of(id)];
    bus.p_load_kw *= factor;
    bus.q_load_kvar *= factor;
  }
  return out;
}

NetworkCase apply_dg(const NetworkCase& net, std::span<const DgUnit> units) {
  NetworkCase out = net;
  std::set<BusId> occupied;
  for (const auto& u : net.dg_units) occupied.insert(u.bus);
  for (const auto& unit : units) {
    validate_dg_unit(net, unit);
    if (!occupied.insert(unit.bus).second) {
      throw CaseError("duplicate DG unit at bus " + std::to_string(unit.bus));
    }
    out.dg_units.push_back(unit);
  }
  return out;
}

NetworkCase apply_dg(const NetworkCase& net, const DgPlacement& placement) {
  return apply_dg(net, std::span<const DgUnit>(placement.units));
}

NetworkCase remove_dg(const NetworkCase& net, BusId bus) {
  NetworkCase out = net;
  auto it = std::find_if(out.dg_units.begin(), out.dg_units.end(),
                         [bus](const DgUnit& u) { return u.bus == bus; });
  if (it == out.dg_units.end()) {
    throw CaseError("no DG unit at bus " + std::to_string(bus));
  }
  out.dg_units.erase(it);
  return out;
}

PerUnitCase to_per_unit(const NetworkCase& net) {
  if (!(net.v_base_kv > 0.0) || !(net.s_base_mva > 0.0)) {
    throw CaseError("voltage and power bases must be positive");
  }
  PerUnitCase pu;
  pu.v_base_kv = net.v_base_kv;
  pu.s_base_mva = net.s_base_mva;
  pu.z_base_ohm = base_impedance_ohm(net.v_base_kv, net.s_base_mva);
  pu.slack_voltage = net.slack_voltage_pu;

  const double s_base_kva = net.s_base_mva * 1000.0;
  pu.branch_z.resize(static_cast<Eigen::Index>(net.branches.size()));
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    pu.branch_z[static_cast<Eigen::Index>(k)] =
        std::complex<double>(br.r_ohm, br.x_ohm) / pu.z_base_ohm;
  }
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  pu.load.resize(n);
  pu.generation = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = net.buses[static_cast<std::size_t>(i)];
    pu.load[i] = std::complex<double>(b.p_load_kw, b.q_load_kvar) / s_base_kva;
  }
  for (const auto& u : net.dg_units) {
    const auto i = static_cast<Eigen::Index>(net.index_of(u.bus));
    pu.generation[i] += std::complex<double>(u.p_kw, u.q_kvar) / s_base_kva;
  }
  return pu;
}

NetworkCase from_per_unit(const PerUnitCase& pu, const NetworkCase& topology) {
  NetworkCase out = topology;
  out.v_base_kv = pu.v_base_kv;
  out.s_base_mva = pu.s_base_mva;
  out.slack_voltage_pu = pu.slack_voltage;
  const double s_base_kva = pu.s_base_mva * 1000.0;
  for (std::size_t k = 0; k < out.branches.size(); ++k) {
    const auto z = pu.branch_z[static_cast<Eigen::Index>(k)] * pu.z_base_ohm;
    out.branches[k].r_ohm = z.real();
    out.branches[k].x_ohm = z.imag();
  }
  for (std::size_t i = 0; i < out.buses.size(); ++i) {
    const auto s = pu.load[static_cast<Eigen::Index>(i)] * s_base_kva;
    out.buses[i].p_load_kw = s.real();
    out.buses[i].q_load_kvar = s.imag();
  }
  for (auto& u : out.dg_units) {
    const auto s =
        pu.generation[static_cast<Eigen::Index>(out.index_of(u.bus))] *
        s_base_kva;
    u.p_kw = s.real();
    u.q_kvar = s.imag();
  }
  return out;
}

}  // namespace gridres
