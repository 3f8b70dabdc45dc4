#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gridres/netmodel.hpp"
#include "oracle.hpp"
#include "test_support.hpp"

using namespace gridres;
using gridres::testing::ieee33;

namespace {

const char* kTwoBus = R"({
  "v_base_kv": 12.66, "s_base_mva": 10.0, "slack_voltage_pu": 1.0,
  "buses": [{"id": 1, "p_load_kw": 0, "q_load_kvar": 0, "is_slack": true},
            {"id": 2, "p_load_kw": 100, "q_load_kvar": 60, "is_slack": false}],
  "branches": [{"from": 1, "to": 2, "r_ohm": 0.0922, "x_ohm": 0.047, "status": true}]
})";

NetworkCase with_extra_branch(NetworkCase net, BusId from, BusId to) {
  net.branches.push_back({from, to, 0.5, 0.5, true});
  return net;
}

}  // namespace

TEST(LoadCase, BundledIeee33) {
  const NetworkCase net = ieee33();
  EXPECT_EQ(net.name, "ieee33");
  EXPECT_EQ(net.buses.size(), 33u);
  const auto in_service = std::count_if(net.branches.begin(), net.branches.end(),
                                        [](const Branch& b) { return b.in_service; });
  EXPECT_EQ(in_service, 32);
  EXPECT_DOUBLE_EQ(net.total_p_load_kw(), 3715.0);
  EXPECT_DOUBLE_EQ(net.total_q_load_kvar(), 2300.0);
  EXPECT_EQ(net.slack_id(), 1);
  EXPECT_DOUBLE_EQ(net.v_base_kv, 12.66);
  EXPECT_DOUBLE_EQ(net.s_base_mva, 10.0);
  EXPECT_TRUE(net.dg_units.empty());
}

TEST(LoadCase, TwoBusToy) {
  const NetworkCase net = parse_case(kTwoBus);
  EXPECT_EQ(net.buses.size(), 2u);
  EXPECT_EQ(net.branches.size(), 1u);
}

TEST(LoadCase, Errors) {
  EXPECT_THROW(parse_case("{not json"), CaseError);
  EXPECT_THROW(parse_case(R"({"branches": []})"), CaseError);  // no buses
  EXPECT_THROW(load_case("/nonexistent/case.json"), CaseError);

  NetworkCase dup = parse_case(kTwoBus);
  dup.buses[1].id = 1;
  EXPECT_THROW(validate_case(dup), CaseError);

  NetworkCase no_slack = parse_case(kTwoBus);
  no_slack.buses[0].is_slack = false;
  EXPECT_THROW(validate_case(no_slack), CaseError);

  NetworkCase bad_slack_v = parse_case(kTwoBus);
  bad_slack_v.slack_voltage_pu = 1.2;
  EXPECT_THROW(validate_case(bad_slack_v), CaseError);

  NetworkCase negative_r = parse_case(kTwoBus);
  negative_r.branches[0].r_ohm = -0.1;
  EXPECT_THROW(validate_case(negative_r), CaseError);
}

TEST(LoadCase, LoopIsTopologyError) {
  const std::string text = case_to_json(with_extra_branch(ieee33(), 33, 21));
  EXPECT_THROW(parse_case(text), TopologyError);
}

TEST(ValidateRadial, Ieee33ParentMap) {
  const NetworkCase net = ieee33();
  const RadialOrder order = validate_radial(net);
  EXPECT_EQ(order.parent_branch.size(), 32u);
  const Branch& parent18 = net.branches[order.parent_branch.at(18)];
  EXPECT_EQ(parent18.from_bus, 17);
  EXPECT_EQ(parent18.to_bus, 18);
  ASSERT_EQ(order.order.size(), 33u);
  EXPECT_EQ(order.order.front(), order.slack_index);
  // parents precede children
  std::vector<int> position(net.buses.size());
  for (std::size_t k = 0; k < order.order.size(); ++k) position[order.order[k]] = static_cast<int>(k);
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    if (order.parent_bus[i] >= 0) EXPECT_LT(position[order.parent_bus[i]], position[i]);
  }
}

TEST(ValidateRadial, SlackOnly) {
  NetworkCase net;
  net.buses = {{1, 0.0, 0.0, true}};
  const RadialOrder order = validate_radial(net);
  EXPECT_TRUE(order.parent_branch.empty());
  EXPECT_EQ(order.order.size(), 1u);
}

TEST(ValidateRadial, TopologyErrors) {
  EXPECT_THROW(validate_radial(with_extra_branch(ieee33(), 33, 21)), TopologyError);

  NetworkCase disconnected = ieee33();
  disconnected.branches[17].in_service = false;  // 18 -> ... cut
  EXPECT_THROW(validate_radial(disconnected), TopologyError);

  NetworkCase two_slacks = ieee33();
  two_slacks.buses[5].is_slack = true;
  EXPECT_THROW(validate_radial(two_slacks), TopologyError);
}

TEST(ValidateRadial, RandomTreesSatisfyTreeProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const NetworkCase net = oracle::random_feeder(rng, 2 + trial);
    const RadialOrder order = validate_radial(net);
    EXPECT_EQ(net.branches.size(), net.buses.size() - 1);
    EXPECT_EQ(order.order.size(), net.buses.size());
  }
}

TEST(ScaleLoads, TargetsOnly) {
  const NetworkCase net = ieee33();
  const std::vector<BusId> targets{16, 17, 18};
  const NetworkCase scaled = scale_loads(net, targets, 0.15);
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const bool hit = std::find(targets.begin(), targets.end(), net.buses[i].id) != targets.end();
    const double f = hit ? 1.15 : 1.0;
    EXPECT_DOUBLE_EQ(scaled.buses[i].p_load_kw, net.buses[i].p_load_kw * f);
    EXPECT_DOUBLE_EQ(scaled.buses[i].q_load_kvar, net.buses[i].q_load_kvar * f);
  }
  EXPECT_EQ(net, ieee33());  // input untouched
  EXPECT_EQ(scale_loads(net, targets, 0.0), net);
}

TEST(ScaleLoads, ToyArithmeticAndErrors) {
  const NetworkCase toy = parse_case(kTwoBus);
  const std::vector<BusId> two{2};
  EXPECT_NEAR(scale_loads(toy, two, 0.10).buses[1].p_load_kw, 110.0, 1e-12);
  const std::vector<BusId> unknown{99};
  EXPECT_THROW(scale_loads(toy, unknown, 0.1), CaseError);
  EXPECT_THROW(scale_loads(toy, two, -1.0), std::invalid_argument);
}

TEST(ScaleLoads, CompositionProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> m(-0.9, 2.0);
  const NetworkCase net = ieee33();
  const std::vector<BusId> targets{3, 10, 17, 25, 33};
  for (int trial = 0; trial < 100; ++trial) {
    const double m1 = m(rng);
    const double m2 = m(rng);
    const NetworkCase twice = scale_loads(scale_loads(net, targets, m1), targets, m2);
    const NetworkCase once = scale_loads(net, targets, (1 + m1) * (1 + m2) - 1);
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
      EXPECT_NEAR(twice.buses[i].p_load_kw, once.buses[i].p_load_kw,
                  1e-12 * std::max(1.0, once.buses[i].p_load_kw));
      EXPECT_NEAR(twice.buses[i].q_load_kvar, once.buses[i].q_load_kvar,
                  1e-12 * std::max(1.0, once.buses[i].q_load_kvar));
    }
  }
}

TEST(ApplyDg, ReferencePlacement) {
  const NetworkCase net = apply_dg(ieee33(), gridres::testing::reference_placement());
  ASSERT_EQ(net.dg_units.size(), 3u);
  EXPECT_EQ(net.dg_units[0], (DgUnit{30, 852.0, 0.0}));
  EXPECT_EQ(net.dg_units[2], (DgUnit{14, 718.0, 0.0}));
  const PerUnitCase pu = to_per_unit(net);
  const auto i30 = static_cast<Eigen::Index>(net.index_of(30));
  EXPECT_NEAR(pu.net_load()[i30].real(), (200.0 - 852.0) / 10000.0, 1e-15);
  EXPECT_NEAR(pu.net_load()[i30].imag(), 600.0 / 10000.0, 1e-15);
}

TEST(ApplyDg, Errors) {
  const NetworkCase net = ieee33();
  const std::vector<DgUnit> small{{5, 50.0, 0.0}};
  EXPECT_THROW(apply_dg(net, small), CaseError);
  const std::vector<DgUnit> big{{5, 5000.5, 0.0}};
  EXPECT_THROW(apply_dg(net, big), CaseError);
  const std::vector<DgUnit> slack{{1, 500.0, 0.0}};
  EXPECT_THROW(apply_dg(net, slack), CaseError);
  const std::vector<DgUnit> dup{{5, 500.0, 0.0}, {5, 600.0, 0.0}};
  EXPECT_THROW(apply_dg(net, dup), CaseError);
  const std::vector<DgUnit> reactive{{5, 500.0, 10.0}};
  EXPECT_THROW(apply_dg(net, reactive), CaseError);
  const std::vector<DgUnit> ok{{5, 500.0, 0.0}};
  EXPECT_THROW(apply_dg(apply_dg(net, ok), ok), CaseError);
}

TEST(ApplyDg, SizedAtLoadCancels) {
  const NetworkCase net = ieee33();
  const std::vector<DgUnit> unit{{24, 420.0, 0.0}};
  const PerUnitCase pu = to_per_unit(apply_dg(net, unit));
  EXPECT_EQ(pu.net_load()[static_cast<Eigen::Index>(net.index_of(24))].real(), 0.0);
}

TEST(ApplyDg, RemoveRestoresOriginal) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<BusId> bus(2, 33);
  std::uniform_real_distribution<double> kw(kDgMinKw, kDgMaxKw);
  const NetworkCase net = ieee33();
  for (int trial = 0; trial < 50; ++trial) {
    const DgUnit unit{bus(rng), kw(rng), 0.0};
    const std::vector<DgUnit> one{unit};
    EXPECT_EQ(remove_dg(apply_dg(net, one), unit.bus), net);
  }
  EXPECT_THROW(remove_dg(net, 5), CaseError);
}

TEST(PerUnit, Ieee33Bases) {
  const PerUnitCase pu = to_per_unit(ieee33());
  EXPECT_NEAR(pu.z_base_ohm, 16.02756, 1e-9);
  EXPECT_NEAR(pu.branch_z[0].real(), 0.005753, 5e-7);
  EXPECT_NEAR(pu.branch_z[0].real(), 0.0922 / 16.02756, 1e-15);
}

TEST(PerUnit, ZeroImpedanceAndBadBases) {
  NetworkCase net = parse_case(kTwoBus);
  net.branches[0].r_ohm = 0.0;
  net.branches[0].x_ohm = 0.0;
  EXPECT_EQ(to_per_unit(net).branch_z[0], std::complex<double>(0.0, 0.0));
  net.s_base_mva = 0.0;
  EXPECT_THROW(to_per_unit(net), CaseError);
  net.s_base_mva = 10.0;
  net.v_base_kv = -1.0;
  EXPECT_THROW(to_per_unit(net), CaseError);
}

TEST(PerUnit, RoundTripProperty) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> base_kv(0.4, 69.0);
  std::uniform_real_distribution<double> base_mva(0.1, 100.0);
  auto rel = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
  };
  for (int trial = 0; trial < 50; ++trial) {
    NetworkCase net = oracle::random_feeder(rng, 3 + trial % 30);
    net.v_base_kv = base_kv(rng);
    net.s_base_mva = base_mva(rng);
    std::vector<DgUnit> dg{{net.buses[net.buses[0].is_slack ? 1 : 0].id, 750.0, 0.0}};
    net = apply_dg(net, dg);
    const NetworkCase back = from_per_unit(to_per_unit(net), net);
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
      EXPECT_TRUE(rel(back.branches[k].r_ohm, net.branches[k].r_ohm));
      EXPECT_TRUE(rel(back.branches[k].x_ohm, net.branches[k].x_ohm));
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
      EXPECT_TRUE(rel(back.buses[i].p_load_kw, net.buses[i].p_load_kw));
      EXPECT_TRUE(rel(back.buses[i].q_load_kvar, net.buses[i].q_load_kvar));
    }
    EXPECT_TRUE(rel(back.dg_units[0].p_kw, net.dg_units[0].p_kw));
  }
}

TEST(CaseJson, SerializationRoundTrip) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const NetworkCase net = oracle::random_feeder(rng, 5 + trial);
    EXPECT_EQ(parse_case(case_to_json(net)), net);
  }
  const NetworkCase dg = apply_dg(ieee33(), gridres::testing::reference_placement());
  EXPECT_EQ(parse_case(case_to_json(dg)), dg);
}
