#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace gcnlab {

using Index = Eigen::Index;

// Dense real matrix. Feature-like matrices are channels x nodes, so each
// node's feature vector is one contiguous column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace gcnlab
