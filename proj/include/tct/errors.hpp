#pragma once

#include <stdexcept>

#include "tct/numerics.hpp"

namespace tct {

/// Malformed user input: files, headers, config values, manifests.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checked invariant failed inside the engine. Indicates a bug.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tct
