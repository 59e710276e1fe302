// Copyright 2026 The vilab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vilab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Random engine used everywhere. All randomness is drawn from an explicit,
/// caller-owned engine so that runs are reproducible from a seed.
using Rng = std::mt19937_64;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Eigensolver or linear-solve failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A required quantity (reference solution, constants) has not been computed.
class MissingDataError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline void require_dim(const Vector& x, Index d, const char* where) {
  if (x.size() != d) {
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (got " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(d) + ")");
  }
}

}  // namespace detail

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Bernoulli(p) coin.
inline bool coin(Rng& rng, double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

/// Uniform k-subset of [0, n) in increasing order (Floyd's algorithm, then
/// sorted).
inline std::vector<std::size_t> uniform_subset(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  std::vector<char> taken(n, 0);
  for (std::size_t j = n - k; j < n; ++j) {
    std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (taken[t]) t = j;
    taken[t] = 1;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (taken[i]) chosen.push_back(i);
  return chosen;
}

/// Matrix of i.i.d. standard normals.
inline Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  // Column-major fill order is part of the seeded contract; do not reorder.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Vector gaussian_vector(Rng& rng, Index n, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

/// Bit-exact text encoding of a double ("%a" hex float; "inf"/"-inf"/"nan").
inline std::string to_hex(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline double from_hex(const std::string& s) {
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("malformed float literal '" + s + "'");
  return v;
}

/// Decimal with 17 significant digits; enough to round-trip a double.
inline std::string to_decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace vilab
