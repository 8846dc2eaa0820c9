#pragma once

// Shared numeric types and the error hierarchy used across the library.

#include <Eigen/Dense>

#include <array>
#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dasco {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Block-stacked network variables keep one agent per row. Matrix-valued
// per-agent quantities (d x p Jacobians) are stored column-stacked in a row
// of length d*p, which is Eigen's native column-major flattening.
using BlockMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t round, const std::string& what)
      : Error("diverged at round " + std::to_string(round) + ": " + what), round_(round) {}

  std::int64_t round() const noexcept { return round_; }

 private:
  std::int64_t round_;
};

namespace detail {

inline void require(bool cond, const char* msg) {
  if (!cond) throw ConfigError(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace detail

}  // namespace dasco
