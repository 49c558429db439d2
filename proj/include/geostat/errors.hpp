#pragma once

#include <stdexcept>
#include <string>

namespace geostat {

// Bad inputs: parameters outside their domain, dimension mismatches.
using domain_error = std::invalid_argument;

// Factorization failures, non-PD matrices and similar numerical trouble.
class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Statistical estimation failed (rank deficiency, non-convergence, ...).
class estimation_error : public std::runtime_error {
public:
  explicit estimation_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace geostat
