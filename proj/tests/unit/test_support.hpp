#pragma once

#include <filesystem>
#include <string>

#include "gridres/netmodel.hpp"

namespace gridres::testing {

inline std::filesystem::path source_dir() { return GRIDRES_SOURCE_DIR; }

inline NetworkCase ieee33(double slack_v = 1.0) {
  NetworkCase net = load_case(source_dir() / "cases" / "ieee33.json");
  net.slack_voltage_pu = slack_v;
  return net;
}

inline DgPlacement reference_placement() {
  return DgPlacement{{DgUnit{30, 852.0, 0.0}, DgUnit{24, 765.0, 0.0}, DgUnit{14, 718.0, 0.0}}};
}

}  // namespace gridres::testing
