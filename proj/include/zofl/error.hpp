#pragma once

#include <stdexcept>
#include <string>

namespace zofl {

// Bad user input: configs, constants, topologies.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A query point fell outside the enlarged feasible set.
struct domain_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Requested combination exists in the planner but has no implementation.
struct unsupported_error : std::logic_error {
  using std::logic_error::logic_error;
};

// Numerical failure during a run (non-finite iterates and the like).
struct runtime_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace zofl
