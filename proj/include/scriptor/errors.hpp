#pragma once

#include <stdexcept>
#include <string>

namespace scriptor {

// Shape disagreement between tensors (wrong extents, mismatched channels).
struct shape_error : std::runtime_error {
  explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

// Out-of-range or otherwise invalid scalar argument.
struct parameter_error : std::runtime_error {
  explicit parameter_error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid network or corpus specification.
struct spec_error : std::runtime_error {
  explicit spec_error(const std::string& what) : std::runtime_error(what) {}
};

// Dataset cannot support the requested operation (too few patches, no ink).
struct data_error : std::runtime_error {
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Configuration file problems; carries a line number where known.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// File system / serialization failures.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace scriptor
