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
#include <numeric>
#include <string>
#include <vector>

#include "vilab/core.hpp"
#include "vilab/problem.hpp"

namespace vilab {

enum class SamplingKind { Uniform, Importance, WithoutReplacement };

inline const char* to_string(SamplingKind k) {
  switch (k) {
    case SamplingKind::Uniform: return "uniform";
    case SamplingKind::Importance: return "importance";
    case SamplingKind::WithoutReplacement: return "without_replacement";
  }
  return "?";
}

inline SamplingKind sampling_kind_from_string(const std::string& s) {
  if (s == "uniform") return SamplingKind::Uniform;
  if (s == "importance") return SamplingKind::Importance;
  if (s == "without_replacement") return SamplingKind::WithoutReplacement;
  throw ConfigError("unknown sampling scheme '" + s + "'");
}

/// Distribution of the sampling vector xi with E[xi_i] = 1.
///
/// Uniform and Importance draw `batch` i.i.d. indices; WithoutReplacement
/// draws a uniform `batch`-subset.
struct SamplingScheme {
  SamplingKind kind = SamplingKind::Uniform;
  std::size_t batch = 1;
  std::vector<double> probabilities;  // Importance only

  static SamplingScheme uniform(std::size_t b = 1) {
    detail::require(b >= 1, "SamplingScheme: batch must be >= 1");
    return {SamplingKind::Uniform, b, {}};
  }

  static SamplingScheme without_replacement(std::size_t b) {
    detail::require(b >= 1, "SamplingScheme: batch must be >= 1");
    return {SamplingKind::WithoutReplacement, b, {}};
  }

  /// p_i = ell_i / (n ell_bar).
  static SamplingScheme importance(const std::vector<double>& ell_i, std::size_t b = 1) {
    detail::require(b >= 1, "SamplingScheme: batch must be >= 1");
    detail::require(!ell_i.empty(), "SamplingScheme: empty constants");
    const double total = std::accumulate(ell_i.begin(), ell_i.end(), 0.0);
    detail::require(total > 0.0, "SamplingScheme: constants must not all vanish");
    SamplingScheme s{SamplingKind::Importance, b, {}};
    s.probabilities.reserve(ell_i.size());
    for (double l : ell_i) {
      detail::require(l >= 0.0, "SamplingScheme: negative constant");
      s.probabilities.push_back(l / total);
    }
    return s;
  }

  void validate(std::size_t n) const {
    detail::require(batch >= 1, "SamplingScheme: batch must be >= 1");
    if (kind == SamplingKind::WithoutReplacement)
      detail::require(batch <= n, "SamplingScheme: batch exceeds n for without-replacement sampling");
    if (kind == SamplingKind::Importance)
      detail::require(probabilities.size() == n, "SamplingScheme: importance weights do not match n");
  }

  double probability(std::size_t i, std::size_t n) const {
    return kind == SamplingKind::Importance ? probabilities[i] : 1.0 / static_cast<double>(n);
  }
};

/// One realization of xi, stored sparsely: index k contributes
/// weights[k] / n * F_{indices[k]}(x). Repeated indices are allowed.
struct SamplingDraw {
  std::vector<std::size_t> indices;
  std::vector<double> weights;
};

inline SamplingDraw draw(const SamplingScheme& scheme, std::size_t n, Rng& rng) {
  scheme.validate(n);
  SamplingDraw out;
  const double b = static_cast<double>(scheme.batch);
  out.indices.reserve(scheme.batch);
  out.weights.reserve(scheme.batch);
  switch (scheme.kind) {
    case SamplingKind::Uniform:
      for (std::size_t t = 0; t < scheme.batch; ++t) {
        out.indices.push_back(uniform_index(rng, n));
        out.weights.push_back(static_cast<double>(n) / b);
      }
      break;
    case SamplingKind::Importance: {
      std::discrete_distribution<std::size_t> pick(scheme.probabilities.begin(),
                                                   scheme.probabilities.end());
      for (std::size_t t = 0; t < scheme.batch; ++t) {
        const std::size_t i = pick(rng);
        out.indices.push_back(i);
        out.weights.push_back(1.0 / (b * scheme.probabilities[i]));
      }
      break;
    }
    case SamplingKind::WithoutReplacement:
      out.indices = uniform_subset(rng, n, scheme.batch);
      out.weights.assign(scheme.batch, static_cast<double>(n) / b);
      break;
  }
  return out;
}

/// F_xi(x) = (1/n) sum_k xi_k F_{i_k}(x).
inline Vector apply_draw(const SamplingDraw& d, const FiniteSumOperator& op, const Vector& x) {
  Vector g = Vector::Zero(op.dim());
  for (std::size_t k = 0; k < d.indices.size(); ++k)
    g.noalias() += d.weights[k] * op.eval_component(d.indices[k], x);
  return g / static_cast<double>(op.size());
}

struct WeightedDraw {
  double probability;
  SamplingDraw draw;
};

/// Every outcome of the scheme with its probability (ordered tuples for the
/// i.i.d. schemes, subsets without replacement).
inline std::vector<WeightedDraw> enumerate_draws(const SamplingScheme& scheme, std::size_t n,
                                                 std::size_t max_outcomes = 1000000) {
  scheme.validate(n);
  std::vector<WeightedDraw> out;
  const std::size_t b = scheme.batch;
  const double bd = static_cast<double>(b);
  if (scheme.kind == SamplingKind::WithoutReplacement) {
    std::vector<std::size_t> idx(b);
    std::iota(idx.begin(), idx.end(), 0);
    double count = 1.0;
    for (std::size_t t = 0; t < b; ++t) count = count * static_cast<double>(n - t) / static_cast<double>(t + 1);
    detail::require(count <= static_cast<double>(max_outcomes), "enumerate_draws: outcome space too large");
    const double prob = 1.0 / std::round(count);
    while (true) {
      out.push_back({prob, {idx, std::vector<double>(b, static_cast<double>(n) / bd)}});
      std::size_t pos = b;
      while (pos > 0 && idx[pos - 1] == n - b + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t t = pos; t < b; ++t) idx[t] = idx[t - 1] + 1;
    }
    return out;
  }
  detail::require(std::pow(static_cast<double>(n), bd) <= static_cast<double>(max_outcomes),
                  "enumerate_draws: outcome space too large");
  std::vector<std::size_t> idx(b, 0);
  while (true) {
    WeightedDraw w{1.0, {idx, {}}};
    for (std::size_t i : idx) {
      const double p = scheme.probability(i, n);
      w.probability *= p;
      w.draw.weights.push_back(1.0 / (bd * p));
    }
    out.push_back(std::move(w));
    std::size_t pos = 0;
    while (pos < b && ++idx[pos] == n) idx[pos++] = 0;
    if (pos == b) break;
  }
  return out;
}

struct SchemeConstants {
  double ell_D = 0.0;
  /// Multiplier applied to the single-draw variance at the solution.
  double sigma_scale = 1.0;
};

inline SchemeConstants scheme_constants(const SamplingScheme& scheme,
                                        const ProblemConstants& c, std::size_t n) {
  scheme.validate(n);
  detail::require(!c.ell_i.empty(), "scheme_constants: constants not populated");
  const double b = static_cast<double>(scheme.batch);
  switch (scheme.kind) {
    case SamplingKind::Uniform: return {c.ell_max, 1.0 / b};
    case SamplingKind::Importance: return {c.ell_bar, 1.0 / b};
    case SamplingKind::WithoutReplacement: {
      if (n == 1) return {c.ell, 0.0};
      const double nd = static_cast<double>(n);
      const double denom = b * (nd - 1.0);
      return {nd * (b - 1.0) / denom * c.ell + (nd - b) / denom * c.ell_max, (nd - b) / denom};
    }
  }
  return {};
}

/// E||F_xi(x*) - F(x*)||^2 for the single-draw version of the scheme
/// (uniform or importance), before batch scaling.
inline double base_sigma_star_sq(const SamplingScheme& scheme, const ProblemInstance& problem) {
  const Vector& xs = problem.require_solution();
  const std::size_t n = problem.size();
  const Vector fstar = problem.op.eval_full(xs);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = scheme.kind == SamplingKind::Importance ? scheme.probabilities[i]
                                                             : 1.0 / static_cast<double>(n);
    if (p == 0.0) continue;
    acc += p * (problem.op.eval_component(i, xs) / (static_cast<double>(n) * p) - fstar).squaredNorm();
  }
  return acc;
}

/// Scheme-specific variance at the solution, sigma_*^2.
inline double sigma_star_sq(const SamplingScheme& scheme, const ProblemInstance& problem) {
  scheme.validate(problem.size());
  const auto sc = scheme_constants(scheme, problem.require_constants(), problem.size());
  return base_sigma_star_sq(scheme, problem) * sc.sigma_scale;
}

/// Oracle-complexity-optimal batch size for minibatch sampling without
/// replacement; ties at the case boundary resolve to the smaller batch.
inline std::size_t optimal_batchsize(const ProblemInstance& problem, double epsilon) {
  detail::require(epsilon > 0.0, "optimal_batchsize: epsilon must be positive");
  const auto& c = problem.require_constants();
  detail::require(c.mu > 0.0, "optimal_batchsize: mu must be positive");
  const double n = static_cast<double>(problem.size());
  const double sigma_us = base_sigma_star_sq(SamplingScheme::uniform(1), problem);
  const double me = c.mu * epsilon;
  if (c.ell_max * me >= sigma_us) return 1;
  const double value = n * (sigma_us - me * c.ell_max) / (sigma_us + me * (n * c.ell - c.ell_max));
  const double b = std::max(1.0, std::floor(value));
  return static_cast<std::size_t>(std::min(b, n));
}

}  // namespace vilab
