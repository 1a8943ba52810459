#pragma once

#include <stdexcept>
#include <string>

#include "gridfc/grnn.hpp"

namespace gridfc {

/// Raised when a parameter file is missing, truncated, of an unknown version,
/// or inconsistent with its own shape header.
class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// First line of every parameter file; bumped on any format change.
inline constexpr std::string_view kCheckpointVersion = "gridfc-params v1";

/// Text rendering of a full parameter set: version line, shape line, then
/// every tensor in declaration order with row-major entries printed at full
/// precision, so deserialize(serialize(p)) is bit-exact.
[[nodiscard]] std::string serialize_parameters(const GrnnParameters& params);
[[nodiscard]] GrnnParameters deserialize_parameters(const std::string& text);

void save_parameters(const GrnnParameters& params, const std::string& path);
[[nodiscard]] GrnnParameters load_parameters(const std::string& path);

}  // namespace gridfc
