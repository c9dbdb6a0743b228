#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace symopt {

// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid library / constraint / experiment configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// API misuse, e.g. appending to a complete traversal.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Raised when the union of constrained token sets covers the whole library,
// i.e. no token can be sampled at this step.
class InfeasibleStepError : public Error {
 public:
  InfeasibleStepError(std::size_t step, std::vector<std::string> constraint_names)
      : Error(format(step, constraint_names)),
        step_(step),
        constraint_names_(std::move(constraint_names)) {}

  std::size_t step() const { return step_; }
  const std::vector<std::string>& constraint_names() const { return constraint_names_; }

 private:
  static std::string format(std::size_t step, const std::vector<std::string>& names) {
    std::string msg = "infeasible step " + std::to_string(step) +
                      ": constrained sets cover the whole library";
    if (!names.empty()) {
      msg += " (active: ";
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) msg += ", ";
        msg += names[i];
      }
      msg += ")";
    }
    return msg;
  }

  std::size_t step_;
  std::vector<std::string> constraint_names_;
};

}  // namespace symopt
