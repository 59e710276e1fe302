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

#include <cstdint>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "vilab/core.hpp"
#include "vilab/problem.hpp"
#include "vilab/sampling.hpp"

namespace vilab {

/// Constants (A, B, C, rho, D1, D2) of the unified second-moment bound, plus
/// the Lyapunov weight M.
struct TheoryParams {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double rho = 1.0;
  double D1 = 0.0;
  double D2 = 0.0;
  double M = 0.0;

  /// Fills M = 2B/rho (0 when B = 0).
  static TheoryParams make(double A, double B, double C, double rho, double D1, double D2) {
    TheoryParams t{A, B, C, rho, D1, D2, B > 0.0 ? 2.0 * B / rho : 0.0};
    t.validate();
    return t;
  }

  void validate() const {
    detail::require(A >= 0.0 && B >= 0.0 && C >= 0.0 && D1 >= 0.0 && D2 >= 0.0,
                    "TheoryParams: constants must be nonnegative");
    detail::require(rho > 0.0 && rho <= 1.0, "TheoryParams: rho must lie in (0, 1]");
    if (B > 0.0) detail::require(M > B / rho, "TheoryParams: M must exceed B / rho");
  }
};

// -----------------------------------------------------------------------------
// Estimator kinds

struct FullBatch {};
struct SgdaAS {
  SamplingScheme scheme;
};
struct LSvrgda {
  double p = 0.0;
};
struct SagaSgda {};
struct Csgda {};
struct SegaSgda {};

using EstimatorKind = std::variant<FullBatch, SgdaAS, LSvrgda, SagaSgda, Csgda, SegaSgda>;

inline std::string estimator_name(const EstimatorKind& kind) {
  static const char* names[] = {"full_batch", "sgda_as", "lsvrgda", "saga", "csgda", "sega"};
  return names[kind.index()];
}

/// How a coordinate query [F(x)]_j is charged.
enum class CoordinateAccounting {
  PerCoordinate,  // 1 call per query
  FullOperator,   // n calls, the cost of one full operator evaluation
};

inline void validate_kind(const EstimatorKind& kind, std::size_t n) {
  if (const auto* s = std::get_if<SgdaAS>(&kind)) s->scheme.validate(n);
  if (const auto* l = std::get_if<LSvrgda>(&kind))
    detail::require(l->p > 0.0 && l->p <= 1.0, "LSvrgda: p must lie in (0, 1]");
}

/// Mutable memory of an estimator. Only the fields of the active kind are
/// populated.
struct EstimatorState {
  std::size_t kind_index = 0;
  Vector anchor;        // LSvrgda: w
  Vector anchor_value;  // LSvrgda: F(w)
  std::vector<Vector> table;  // SagaSgda: F_i(w_i)
  Vector table_mean;
  std::size_t updates_since_refresh = 0;
  Vector shift;  // SegaSgda: h

  /// Exact mean of the SAGA table.
  Vector recomputed_mean() const {
    Vector m = Vector::Zero(table.front().size());
    for (const auto& t : table) m += t;
    return m / static_cast<double>(table.size());
  }
};

struct InitResult {
  EstimatorState state;
  std::uint64_t oracle_calls = 0;
};

inline InitResult init_estimator(const EstimatorKind& kind, const FiniteSumOperator& op,
                                 const Vector& x0) {
  detail::require_dim(x0, op.dim(), "init_estimator");
  validate_kind(kind, op.size());
  InitResult r;
  r.state.kind_index = kind.index();
  const std::size_t n = op.size();
  if (std::holds_alternative<LSvrgda>(kind)) {
    r.state.anchor = x0;
    r.state.anchor_value = op.eval_full(x0);
    r.oracle_calls = n;
  } else if (std::holds_alternative<SagaSgda>(kind)) {
    r.state.table.reserve(n);
    for (std::size_t i = 0; i < n; ++i) r.state.table.push_back(op.eval_component(i, x0));
    r.state.table_mean = r.state.recomputed_mean();
    r.oracle_calls = n;
  } else if (std::holds_alternative<SegaSgda>(kind)) {
    r.state.shift = Vector::Zero(op.dim());
  }
  return r;
}

struct GradientSample {
  Vector g;
  std::uint64_t oracle_calls = 0;
};

namespace detail {

inline void check_state(const EstimatorKind& kind, const EstimatorState& state) {
  if (state.kind_index != kind.index())
    throw std::invalid_argument("estimator state does not match estimator kind");
}

inline std::uint64_t coordinate_cost(CoordinateAccounting acc, std::size_t n) {
  return acc == CoordinateAccounting::PerCoordinate ? 1 : n;
}

inline void saga_overwrite(EstimatorState& s, std::size_t j, Vector fresh) {
  const double n = static_cast<double>(s.table.size());
  s.table_mean += (fresh - s.table[j]) / n;
  s.table[j] = std::move(fresh);
  if (++s.updates_since_refresh >= s.table.size()) {
    s.table_mean = s.recomputed_mean();
    s.updates_since_refresh = 0;
  }
}

}  // namespace detail

/// Draws g with E[g | x, state] = F(x) and advances the state.
inline GradientSample sample_gradient(const EstimatorKind& kind, EstimatorState& state,
                                      const FiniteSumOperator& op, const Vector& x, Rng& rng,
                                      CoordinateAccounting acc = CoordinateAccounting::PerCoordinate) {
  detail::check_state(kind, state);
  detail::require_dim(x, op.dim(), "sample_gradient");
  const std::size_t n = op.size();
  const Index d = op.dim();
  return std::visit(
      [&](const auto& k) -> GradientSample {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FullBatch>) {
          return {op.eval_full(x), n};
        } else if constexpr (std::is_same_v<K, SgdaAS>) {
          const SamplingDraw dr = draw(k.scheme, n, rng);
          return {apply_draw(dr, op, x), k.scheme.batch};
        } else if constexpr (std::is_same_v<K, LSvrgda>) {
          const std::size_t j = uniform_index(rng, n);
          GradientSample s{op.eval_component(j, x) - op.eval_component(j, state.anchor) +
                               state.anchor_value,
                           2};
          if (coin(rng, k.p)) {
            state.anchor = x;
            state.anchor_value = op.eval_full(x);
            s.oracle_calls += n;
          }
          return s;
        } else if constexpr (std::is_same_v<K, SagaSgda>) {
          const std::size_t j = uniform_index(rng, n);
          Vector fresh = op.eval_component(j, x);
          GradientSample s{fresh - state.table[j] + state.table_mean, 1};
          detail::saga_overwrite(state, j, std::move(fresh));
          return s;
        } else if constexpr (std::is_same_v<K, Csgda>) {
          const Index j = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(d)));
          GradientSample s{Vector::Zero(d), detail::coordinate_cost(acc, n)};
          s.g(j) = static_cast<double>(d) * op.eval_coordinate(j, x);
          return s;
        } else {
          const Index j = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(d)));
          const double fj = op.eval_coordinate(j, x);
          GradientSample s{state.shift, detail::coordinate_cost(acc, n)};
          s.g(j) += static_cast<double>(d) * (fj - state.shift(j));
          state.shift(j) = fj;
          return s;
        }
      },
      kind);
}

struct EstimatorOutcome {
  double probability;
  Vector g;
  EstimatorState next;
};

/// Every outcome of one sample_gradient call with its probability. Used by
/// the exact verification checks; the state is left untouched.
inline std::vector<EstimatorOutcome> enumerate_outcomes(const EstimatorKind& kind,
                                                        const EstimatorState& state,
                                                        const FiniteSumOperator& op,
                                                        const Vector& x) {
  detail::check_state(kind, state);
  detail::require_dim(x, op.dim(), "enumerate_outcomes");
  const std::size_t n = op.size();
  const Index d = op.dim();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_d = 1.0 / static_cast<double>(d);
  std::vector<EstimatorOutcome> out;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FullBatch>) {
          out.push_back({1.0, op.eval_full(x), state});
        } else if constexpr (std::is_same_v<K, SgdaAS>) {
          for (auto& wd : enumerate_draws(k.scheme, n))
            out.push_back({wd.probability, apply_draw(wd.draw, op, x), state});
        } else if constexpr (std::is_same_v<K, LSvrgda>) {
          EstimatorState restarted = state;
          restarted.anchor = x;
          restarted.anchor_value = op.eval_full(x);
          for (std::size_t j = 0; j < n; ++j) {
            Vector g = op.eval_component(j, x) - op.eval_component(j, state.anchor) + state.anchor_value;
            if (k.p < 1.0) out.push_back({inv_n * (1.0 - k.p), g, state});
            out.push_back({inv_n * k.p, std::move(g), restarted});
          }
        } else if constexpr (std::is_same_v<K, SagaSgda>) {
          for (std::size_t j = 0; j < n; ++j) {
            Vector fresh = op.eval_component(j, x);
            Vector g = fresh - state.table[j] + state.table_mean;
            EstimatorState next = state;
            detail::saga_overwrite(next, j, std::move(fresh));
            out.push_back({inv_n, std::move(g), std::move(next)});
          }
        } else if constexpr (std::is_same_v<K, Csgda>) {
          for (Index j = 0; j < d; ++j) {
            Vector g = Vector::Zero(d);
            g(j) = static_cast<double>(d) * op.eval_coordinate(j, x);
            out.push_back({inv_d, std::move(g), state});
          }
        } else {
          for (Index j = 0; j < d; ++j) {
            const double fj = op.eval_coordinate(j, x);
            Vector g = state.shift;
            g(j) += static_cast<double>(d) * (fj - state.shift(j));
            EstimatorState next = state;
            next.shift(j) = fj;
            out.push_back({inv_d, std::move(g), std::move(next)});
          }
        }
      },
      kind);
  return out;
}

/// Operator values at the reference solution, computed once per problem.
struct ReferenceCache {
  Vector x_star;
  Vector f_star;
  std::vector<Vector> f_i_star;

  static ReferenceCache build(const ProblemInstance& problem) {
    ReferenceCache c;
    c.x_star = problem.require_solution();
    c.f_star = problem.op.eval_full(c.x_star);
    c.f_i_star.reserve(problem.size());
    for (std::size_t i = 0; i < problem.size(); ++i)
      c.f_i_star.push_back(problem.op.eval_component(i, c.x_star));
    return c;
  }
};

/// sigma_k^2 of the estimator's memory relative to the solution.
inline double sigma_sq(const EstimatorKind& kind, const EstimatorState& state,
                       const FiniteSumOperator& op, const ReferenceCache& ref) {
  detail::check_state(kind, state);
  if (std::holds_alternative<LSvrgda>(kind)) {
    double acc = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i)
      acc += (op.eval_component(i, state.anchor) - ref.f_i_star[i]).squaredNorm();
    return acc / static_cast<double>(op.size());
  }
  if (std::holds_alternative<SagaSgda>(kind)) {
    double acc = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i) acc += (state.table[i] - ref.f_i_star[i]).squaredNorm();
    return acc / static_cast<double>(op.size());
  }
  if (std::holds_alternative<SegaSgda>(kind)) return (state.shift - ref.f_star).squaredNorm();
  return 0.0;
}

/// Certified constants for the estimator on this problem.
inline TheoryParams theory_params(const EstimatorKind& kind, const ProblemInstance& problem) {
  const auto& c = problem.require_constants();
  const double n = static_cast<double>(problem.size());
  const double d = static_cast<double>(problem.dim());
  validate_kind(kind, problem.size());
  return std::visit(
      [&](const auto& k) -> TheoryParams {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FullBatch>) {
          return TheoryParams::make(c.ell, 0, 0, 1, 0, 0);
        } else if constexpr (std::is_same_v<K, SgdaAS>) {
          const auto sc = scheme_constants(k.scheme, c, problem.size());
          return TheoryParams::make(sc.ell_D, 0, 0, 1, 2.0 * sigma_star_sq(k.scheme, problem), 0);
        } else if constexpr (std::is_same_v<K, LSvrgda>) {
          return TheoryParams::make(c.ell_hat, 2, k.p * c.ell_hat / 2.0, k.p, 0, 0);
        } else if constexpr (std::is_same_v<K, SagaSgda>) {
          return TheoryParams::make(c.ell_hat, 2, c.ell_hat / (2.0 * n), 1.0 / n, 0, 0);
        } else if constexpr (std::is_same_v<K, Csgda>) {
          const Vector fs = problem.op.eval_full(problem.require_solution());
          return TheoryParams::make(d * c.ell, 0, 0, 1, 2.0 * d * fs.squaredNorm(), 0);
        } else {
          return TheoryParams::make(d * c.ell, 2.0 * d, c.ell / (2.0 * d), 1.0 / d, 0, 0);
        }
      },
      kind);
}

/// Random memory for verification sweeps: anchors, table points and shifts
/// drawn around the solution with the given spread.
inline EstimatorState random_state(const EstimatorKind& kind, const FiniteSumOperator& op,
                                   const ReferenceCache& ref, double spread, Rng& rng) {
  EstimatorState s = init_estimator(kind, op, ref.x_star).state;
  const Index d = op.dim();
  if (std::holds_alternative<LSvrgda>(kind)) {
    s.anchor = ref.x_star + gaussian_vector(rng, d, spread);
    s.anchor_value = op.eval_full(s.anchor);
  } else if (std::holds_alternative<SagaSgda>(kind)) {
    for (std::size_t i = 0; i < op.size(); ++i)
      s.table[i] = op.eval_component(i, ref.x_star + gaussian_vector(rng, d, spread));
    s.table_mean = s.recomputed_mean();
  } else if (std::holds_alternative<SegaSgda>(kind)) {
    s.shift = ref.f_star + gaussian_vector(rng, d, spread);
  }
  return s;
}

}  // namespace vilab
