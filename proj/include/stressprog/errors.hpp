#pragma once

#include <stdexcept>
#include <string>

namespace stressprog {

// Malformed or missing input data (files, manifests, feature payloads).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during optimisation.
class NumericDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stressprog
