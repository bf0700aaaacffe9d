#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "windcond/errors.hpp"
#include "windcond/io.hpp"
#include "windcond/synth.hpp"

namespace windcond {

/// Frozen truth specifications for the simulation studies: two plains-style
/// sites (unimodal and bimodal direction roses) and one mountain site with a
/// harder multimodal rose. The same JSON ships under fixtures/ for use from
/// the command line.
inline std::string_view fixture_json(std::string_view name) {
  if (name == "plains-unimodal") {
    return R"({
  "weights": [1.0],
  "means": [[0.8, 1.15]],
  "covs": [[[4.8, 0.4], [0.4, 4.4]]]
}
)";
  }
  if (name == "plains-bimodal") {
    return R"({
  "weights": [0.55, 0.45],
  "means": [[2.2, 2.6], [-1.8, -2.3]],
  "covs": [[[3.4, 0.9], [0.9, 2.8]], [[3.0, 0.6], [0.6, 3.2]]]
}
)";
  }
  if (name == "mountain-multimodal") {
    return R"({
  "weights": [0.4, 0.34, 0.26],
  "means": [[0.4, 3.7], [3.0, -1.0], [-2.6, -1.9]],
  "covs": [[[1.8, 0.4], [0.4, 2.8]], [[2.6, -0.8], [-0.8, 1.6]], [[2.2, 0.6], [0.6, 2.0]]]
}
)";
  }
  throw std::invalid_argument("unknown truth fixture '" + std::string(name) + "'");
}

inline std::vector<std::string> fixture_names() {
  return {"plains-unimodal", "plains-bimodal", "mountain-multimodal"};
}

inline GaussianMixtureTruth load_fixture(std::string_view name) {
  return truth_from_json(nlohmann::json::parse(fixture_json(name)));
}

}  // namespace windcond
