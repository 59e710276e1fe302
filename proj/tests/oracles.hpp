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

// Reference computations used by the tests. Everything here is written
// against plain loops or dense Eigen decompositions and shares no code path
// with the library beyond the Vector and Matrix types.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Hand-rolled generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
  }
  Vector vector(Eigen::Index d, double scale = 1.0) {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = scale * normal();
    return v;
  }
  Matrix matrix(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * normal();
    return m;
  }
  /// S + mu I + W with S PSD and W skew: strongly monotone, never symmetric.
  Matrix monotone_matrix(Eigen::Index d, double mu, double skew = 1.0) {
    const Matrix g = matrix(d, d);
    const Matrix h = matrix(d, d);
    Matrix a = g * g.transpose() / static_cast<double>(d) + skew * (h - h.transpose()) / 2.0;
    for (Eigen::Index i = 0; i < d; ++i) a(i, i) += mu;
    return a;
  }

 private:
  std::mt19937_64 eng_;
};

inline Vector naive_matvec(const Matrix& a, const Vector& x) {
  Vector out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) acc += a(i, j) * x(j);
    out(i) = acc;
  }
  return out;
}

/// (1/n) sum_i (A_i x + b_i) accumulated in long double.
inline Vector extended_mean(const std::vector<Matrix>& a, const std::vector<Vector>& b, const Vector& x) {
  const Eigen::Index d = x.size();
  std::vector<long double> acc(static_cast<std::size_t>(d), 0.0L);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (Eigen::Index r = 0; r < d; ++r) {
      long double row = b[i](r);
      for (Eigen::Index c = 0; c < d; ++c) row += static_cast<long double>(a[i](r, c)) * x(c);
      acc[static_cast<std::size_t>(r)] += row;
    }
  Vector out(d);
  for (Eigen::Index r = 0; r < d; ++r)
    out(r) = static_cast<double>(acc[static_cast<std::size_t>(r)] / static_cast<long double>(a.size()));
  return out;
}

/// argmin over y in [-r, r] of lambda |y| + (y - v)^2 / (2 gamma): a grid
/// scan brackets the minimizer, then bisection on the sign of the right
/// derivative pins it to machine precision.
inline double prox_1d(double v, double gamma, double lambda, double r) {
  const double hi = std::isinf(r) ? std::abs(v) + 1.0 : r;
  auto f = [&](double y) { return lambda * std::abs(y) + (y - v) * (y - v) / (2.0 * gamma); };
  auto right_slope = [&](double y) { return (y >= 0.0 ? lambda : -lambda) + (y - v) / gamma; };
  const int grid = 2000;
  int best = 0;
  double fbest = std::numeric_limits<double>::infinity();
  for (int t = 0; t <= grid; ++t) {
    const double y = -hi + 2.0 * hi * t / grid;
    if (f(y) < fbest) {
      fbest = f(y);
      best = t;
    }
  }
  const double step = 2.0 * hi / grid;
  double lo_b = std::max(-hi, -hi + step * (best - 1));
  double hi_b = std::min(hi, -hi + step * (best + 1));
  if (right_slope(lo_b) >= 0.0) return lo_b;
  if (right_slope(hi_b) < 0.0) return hi_b;
  for (int t = 0; t < 200; ++t) {
    const double mid = 0.5 * (lo_b + hi_b);
    if (mid == lo_b || mid == hi_b) break;
    (right_slope(mid) >= 0.0 ? hi_b : lo_b) = mid;
  }
  return hi_b;
}

/// Largest c with z^T N z <= c z^T S z via Cholesky whitening of S.
inline double whitened_max_eig(const Matrix& num, const Matrix& sym_den) {
  const Eigen::LLT<Matrix> llt(sym_den);
  const Matrix linv = Matrix(llt.matrixL()).inverse();
  const Matrix w = linv * num * linv.transpose();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (w + w.transpose()));
  return es.eigenvalues().maxCoeff();
}

/// Monte-Carlo lower bound on the same constant by Rayleigh quotients.
inline double sampled_ratio(const Matrix& num, const Matrix& sym_den, Gen& gen, int trials) {
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector z = gen.vector(num.rows());
    best = std::max(best, z.dot(num * z) / z.dot(sym_den * z));
  }
  return best;
}

/// All k-subsets of {0, ..., d-1} via bitmasks.
inline std::vector<std::vector<int>> subsets(int d, int k) {
  std::vector<std::vector<int>> out;
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    std::vector<int> s;
    for (int j = 0; j < d; ++j)
      if (mask & (1u << j)) s.push_back(j);
    out.push_back(s);
  }
  return out;
}

/// Forward-backward iteration for the L1Box fixed point; slow but simple.
inline Vector forward_backward(const Matrix& a, const Vector& b, double lambda, double r, double gamma,
                               int iters) {
  Vector x = Vector::Zero(b.size());
  for (int t = 0; t < iters; ++t) {
    const Vector u = x - gamma * (a * x + b);
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      const double mag = std::min(std::max(std::abs(u(j)) - gamma * lambda, 0.0), r);
      x(j) = u(j) > 0 ? mag : -mag;
    }
  }
  return x;
}

struct MeanVar {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanVar mean_and_stderr(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

/// Oracle-complexity proxy for minibatching without replacement; the argmin
/// over b is the optimal batch size.
inline double batch_complexity(double b, double n, double ell, double ell_max, double mu, double sigma_us,
                               double eps) {
  return std::max((b * (ell - ell_max / n) + ell_max) / mu, (n - b) * sigma_us / (n * mu * mu * eps));
}

}  // namespace oracle
