#pragma once

#include <stdexcept>
#include <string>

namespace calib {

/// Violated precondition or malformed input.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure (non-convergence, infeasible constant, ...).
/// `suggestion` carries the minimal admissible value where one exists,
/// e.g. the smallest C for the adapted metric or the smallest alpha for
/// the metric gluing.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg, double suggestion = 0.0)
      : std::runtime_error(msg), suggestion_(suggestion) {}
  double suggestion() const { return suggestion_; }

 private:
  double suggestion_;
};

}  // namespace calib
