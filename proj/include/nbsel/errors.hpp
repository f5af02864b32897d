#pragma once

#include <stdexcept>
#include <string>

namespace nbsel {

// Invalid input data or configuration: probabilities outside [0,1],
// malformed files, duplicate names, inconsistent feature sets.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A request that would exceed a configured resource bound, e.g. the cell
// list width cap or the exhaustive search budget.
class CapacityError : public std::runtime_error {
public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nbsel
