#pragma once

#include <stdexcept>
#include <string>

namespace mbq {

// Thrown when an iterative scheme fails to reach its tolerance.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Forward-variance curve does not cover a requested maturity range.
class coverage_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number when known.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? what + " at line " + std::to_string(line) : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// Requested value lies outside the attainable range of the inverse problem.
class no_solution_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mbq
