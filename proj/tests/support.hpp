#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace testsupport {

inline std::string data_path(const std::string& name) {
  return std::string(GRIDFC_DATA_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

/// Slack+load pair joined by one branch: 100 MW flows at angle spread 0.5 rad.
inline std::string two_bus_case() {
  return R"(mpc.baseMVA = 100;
mpc.bus = [
  1 3 0;
  2 1 100;
];
mpc.gen = [
  1 100 200;
];
mpc.branch = [
  1 2 0.5 1000 1 0;
];
)";
}

/// Chain 1-2-3-4 with generation at both ends. Cutting 2-3 leaves island
/// {3,4} 50 MW short, exercising pro-rata shedding.
inline std::string four_bus_case() {
  return R"(mpc.baseMVA = 100;
mpc.bus = [
  1 3 0;
  2 1 100;
  3 1 100;
  4 2 0;
];
mpc.gen = [
  1 100 200;
  4 20 50;
];
mpc.branch = [
  1 2 0.1 1000 1 0;
  2 3 0.2 1000 1 0;
  3 4 0.1 1000 1 0;
];
)";
}

/// Two parallel circuits carrying 100 MW each with 150 MW ratings: losing
/// either one overloads and trips the survivor.
inline std::string parallel_pair_case() {
  return R"(mpc.baseMVA = 100;
mpc.bus = [
  1 3 0;
  2 1 200;
];
mpc.gen = [
  1 200 300;
];
mpc.branch = [
  1 2 0.2 150 1 0;
  1 2 0.2 150 1 0;
];
)";
}

}  // namespace testsupport
