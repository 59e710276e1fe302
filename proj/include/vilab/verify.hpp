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

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vilab/compression.hpp"
#include "vilab/distributed.hpp"
#include "vilab/estimators.hpp"
#include "vilab/problem.hpp"
#include "vilab/solver.hpp"

namespace vilab {

enum class CheckMode { Exact, MonteCarlo };

inline const char* to_string(CheckMode m) { return m == CheckMode::Exact ? "exact" : "monte_carlo"; }

/// Outcome of one verification check. A violation is positive when the
/// checked inequality fails; pass means worst_violation <= tolerance.
struct CheckReport {
  std::string name;
  CheckMode mode = CheckMode::Exact;
  std::size_t trials = 0;
  double worst_violation = -kInfinity;
  double tolerance = 0.0;
  bool passed = true;
  std::map<std::string, double> details;

  void observe(double violation) {
    ++trials;
    worst_violation = std::max(worst_violation, violation);
  }
  void note_max(const std::string& key, double v) {
    auto it = details.find(key);
    if (it == details.end() || v > it->second) details[key] = v;
  }
  CheckReport& finish() {
    passed = !(worst_violation > tolerance);
    return *this;
  }
};

/// Weighted sample of (g, next sigma^2) pairs: either every outcome with its
/// probability, or N Monte-Carlo draws with weight 1/N.
struct MomentSample {
  double probability;
  Vector g;
  double next_sigma_sq = 0.0;
};

namespace detail {

inline double normalized_violation(double lhs, double rhs) {
  return (lhs - rhs) / std::max(1.0, std::abs(rhs));
}

inline std::vector<MomentSample> estimator_moments(const EstimatorKind& kind, const EstimatorState& state,
                                                   const FiniteSumOperator& op, const Vector& x,
                                                   const ReferenceCache* ref, CheckMode mode,
                                                   std::size_t samples, Rng& rng) {
  std::vector<MomentSample> out;
  if (mode == CheckMode::Exact) {
    for (auto& o : enumerate_outcomes(kind, state, op, x))
      out.push_back({o.probability, std::move(o.g), ref ? sigma_sq(kind, o.next, op, *ref) : 0.0});
    return out;
  }
  const double w = 1.0 / static_cast<double>(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    EstimatorState next = state;
    Vector g = sample_gradient(kind, next, op, x, rng).g;
    out.push_back({w, std::move(g), ref ? sigma_sq(kind, next, op, *ref) : 0.0});
  }
  return out;
}

inline std::vector<MomentSample> round_moments(const DistributedConfig& cfg, const DistributedState& state,
                                               const std::vector<WorkerShard>& shards, const Vector& x,
                                               const DistributedReference* ref, CheckMode mode,
                                               std::size_t samples, Rng& rng) {
  std::vector<MomentSample> out;
  if (mode == CheckMode::Exact) {
    for (auto& o : enumerate_round(cfg, state, shards, x))
      out.push_back({o.probability, std::move(o.g), ref ? distributed_sigma_sq(o.next, shards, *ref) : 0.0});
    return out;
  }
  const double w = 1.0 / static_cast<double>(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    DistributedState next = state;
    CommLedger ledger;
    Vector g = aggregate_round(cfg, next, shards, x, rng, ledger);
    out.push_back({w, std::move(g), ref ? distributed_sigma_sq(next, shards, *ref) : 0.0});
  }
  return out;
}

// Exact: ||E g - F(x)||. Monte-Carlo: ||mean - F(x)|| minus a 3-standard-error band.
inline double unbiasedness_violation(const std::vector<MomentSample>& ms, const Vector& fx, CheckMode mode,
                                     CheckReport& rep) {
  Vector mean = Vector::Zero(fx.size());
  for (const auto& m : ms) mean += m.probability * m.g;
  const double err = (mean - fx).norm();
  rep.note_max("bias_norm", err);
  if (mode == CheckMode::Exact) return err;
  double second = 0.0;
  for (const auto& m : ms) second += m.probability * (m.g - fx).squaredNorm();
  const double band = 3.0 * std::sqrt(second / static_cast<double>(ms.size()));
  rep.note_max("band", band);
  return err - band;
}

}  // namespace detail

struct CheckOptions {
  CheckMode mode = CheckMode::Exact;
  std::size_t samples = 100000;  // Monte-Carlo draws per point
  std::uint64_t seed = 0;
  double tolerance = 1e-12;
};

/// E[g | x, state] = F(x) for a single-node estimator.
inline CheckReport check_unbiasedness(const EstimatorKind& kind, const EstimatorState& state,
                                      const FiniteSumOperator& op, const Vector& x,
                                      const CheckOptions& opt = {}) {
  CheckReport rep{"unbiasedness/" + estimator_name(kind), opt.mode, 0, -kInfinity,
                  opt.mode == CheckMode::Exact ? opt.tolerance : 0.0, true, {}};
  Rng rng(opt.seed);
  const auto ms = detail::estimator_moments(kind, state, op, x, nullptr, opt.mode, opt.samples, rng);
  rep.observe(detail::unbiasedness_violation(ms, op.eval_full(x), opt.mode, rep));
  return rep.finish();
}

/// E[g | x, state] = F(x) for one compressed round.
inline CheckReport check_unbiasedness(const DistributedConfig& resolved, const DistributedState& state,
                                      const std::vector<WorkerShard>& shards, const FiniteSumOperator& op,
                                      const Vector& x, const CheckOptions& opt = {}) {
  CheckReport rep{std::string("unbiasedness/") + to_string(resolved.method), opt.mode, 0, -kInfinity,
                  opt.mode == CheckMode::Exact ? opt.tolerance : 0.0, true, {}};
  if (opt.mode == CheckMode::Exact && local_mode(resolved.method, shards) == LocalMode::Noisy)
    throw std::invalid_argument("check_unbiasedness: exact mode needs enumerable randomness");
  Rng rng(opt.seed);
  const auto ms = detail::round_moments(resolved, state, shards, x, nullptr, opt.mode, opt.samples, rng);
  rep.observe(detail::unbiasedness_violation(ms, op.eval_full(x), opt.mode, rep));
  return rep.finish();
}

struct KeyAssumptionOptions {
  std::size_t points = 1000;
  /// Standard deviation of the near points around x*.
  double radius = 1.0;
  /// Every `far_every`-th point uses 10 * radius.
  std::size_t far_every = 10;
  CheckMode mode = CheckMode::Exact;
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
};

namespace detail {

inline void key_assumption_point(const std::vector<MomentSample>& ms, const TheoryParams& tp,
                                 const Vector& fx, const Vector& fstar, const Vector& x,
                                 const Vector& xstar, double sigma_now, CheckReport& rep) {
  const double inner = (fx - fstar).dot(x - xstar);
  double lhs7 = 0.0;
  double lhs8 = 0.0;
  for (const auto& m : ms) {
    lhs7 += m.probability * (m.g - fstar).squaredNorm();
    lhs8 += m.probability * m.next_sigma_sq;
  }
  const double rhs7 = 2.0 * tp.A * inner + tp.B * sigma_now + tp.D1;
  const double v7 = normalized_violation(lhs7, rhs7);
  rep.note_max("second_moment_violation", v7);
  rep.observe(v7);
  if (tp.B > 0.0 || tp.C > 0.0 || tp.D2 > 0.0) {
    const double rhs8 = 2.0 * tp.C * inner + (1.0 - tp.rho) * sigma_now + tp.D2;
    const double v8 = normalized_violation(lhs8, rhs8);
    rep.note_max("recursion_violation", v8);
    rep.observe(v8);
  }
}

inline Vector probe_point(const Vector& xstar, const KeyAssumptionOptions& opt, std::size_t t, Rng& rng,
                          double& spread) {
  spread = (opt.far_every > 0 && t % opt.far_every == opt.far_every - 1) ? 10.0 * opt.radius : opt.radius;
  return xstar + gaussian_vector(rng, xstar.size(), spread / std::sqrt(static_cast<double>(xstar.size())));
}

}  // namespace detail

/// Both sides of the second-moment bound and the sigma recursion at random
/// (x, state) pairs. Violations are normalized by max(1, |RHS|).
inline CheckReport check_key_assumption(const EstimatorKind& kind, const ProblemInstance& problem,
                                        const TheoryParams& tp, const KeyAssumptionOptions& opt = {}) {
  CheckReport rep{"key_assumption/" + estimator_name(kind), opt.mode, 0, -kInfinity, opt.tolerance, true, {}};
  const ReferenceCache ref = ReferenceCache::build(problem);
  Rng rng(opt.seed);
  for (std::size_t t = 0; t < opt.points; ++t) {
    double spread = 0.0;
    const Vector x = detail::probe_point(ref.x_star, opt, t, rng, spread);
    const EstimatorState state = random_state(kind, problem.op, ref, spread, rng);
    const auto ms = detail::estimator_moments(kind, state, problem.op, x, &ref, opt.mode, opt.samples, rng);
    detail::key_assumption_point(ms, tp, problem.op.eval_full(x), ref.f_star, x, ref.x_star,
                                 sigma_sq(kind, state, problem.op, ref), rep);
  }
  return rep.finish();
}

inline CheckReport check_key_assumption(const DistributedConfig& resolved, const std::vector<WorkerShard>& shards,
                                        const ProblemInstance& problem, const TheoryParams& tp,
                                        const KeyAssumptionOptions& opt = {}) {
  CheckReport rep{std::string("key_assumption/") + to_string(resolved.method), opt.mode, 0, -kInfinity,
                  opt.tolerance, true, {}};
  const DistributedReference ref = DistributedReference::build(shards, problem.require_solution());
  const Vector fstar = problem.op.eval_full(ref.x_star);
  Rng rng(opt.seed);
  for (std::size_t t = 0; t < opt.points; ++t) {
    double spread = 0.0;
    const Vector x = detail::probe_point(ref.x_star, opt, t, rng, spread);
    const DistributedState state = random_distributed_state(resolved, shards, ref, spread, rng);
    const auto ms = detail::round_moments(resolved, state, shards, x, &ref, opt.mode, opt.samples, rng);
    detail::key_assumption_point(ms, tp, problem.op.eval_full(x), fstar, x, ref.x_star,
                                 distributed_sigma_sq(state, shards, ref), rep);
  }
  return rep.finish();
}

/// Random-point sweep of strong monotonicity (mu), star-cocoercivity (ell),
/// component cocoercivity (ell_i), averaged star-cocoercivity (ell_hat) and,
/// when shards are given, the shard-level constant ell_tilde.
inline CheckReport check_operator_conditions(const ProblemInstance& problem, std::size_t trials,
                                             std::uint64_t seed = 0, double tolerance = 1e-10,
                                             const std::vector<WorkerShard>* shards = nullptr) {
  CheckReport rep{"operator_conditions", CheckMode::MonteCarlo, 0, -kInfinity, tolerance, true, {}};
  const auto& c = problem.require_constants();
  const ReferenceCache ref = ReferenceCache::build(problem);
  std::optional<DistributedConstants> dc;
  std::optional<DistributedReference> dref;
  if (shards) {
    dc = distributed_constants(problem, *shards);
    dref = DistributedReference::build(*shards, ref.x_star);
  }
  const Index d = problem.dim();
  const std::size_t n = problem.size();
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-2.0, 2.0)(rng));
    const Vector x = ref.x_star + gaussian_vector(rng, d, scale);
    const Vector dx = x - ref.x_star;
    const Vector df = problem.op.eval_full(x) - ref.f_star;
    const double inner = df.dot(dx);

    const double v_mu = detail::normalized_violation(c.mu * dx.squaredNorm(), inner);
    const double v_ell = detail::normalized_violation(df.squaredNorm(), c.ell * inner);
    double avg = 0.0;
    for (std::size_t i = 0; i < n; ++i) avg += (problem.op.eval_component(i, x) - ref.f_i_star[i]).squaredNorm();
    avg /= static_cast<double>(n);
    const double v_hat = detail::normalized_violation(avg, c.ell_hat * inner);

    const std::size_t i = uniform_index(rng, n);
    const Vector y = ref.x_star + gaussian_vector(rng, d, scale);
    const Vector dfi = problem.op.eval_component(i, x) - problem.op.eval_component(i, y);
    const double v_i = detail::normalized_violation(dfi.squaredNorm(), c.ell_i[i] * dfi.dot(x - y));

    rep.note_max("mu", v_mu);
    rep.note_max("ell", v_ell);
    rep.note_max("ell_hat", v_hat);
    rep.note_max("ell_i", v_i);
    rep.observe(std::max({v_mu, v_ell, v_hat, v_i}));

    if (shards) {
      double acc = 0.0;
      for (std::size_t w = 0; w < shards->size(); ++w) {
        double local = 0.0;
        for (std::size_t j = 0; j < (*shards)[w].size(); ++j)
          local += ((*shards)[w].eval_piece(j, x) - dref->f_ij_star[w][j]).squaredNorm();
        acc += local / static_cast<double>((*shards)[w].size());
      }
      acc /= static_cast<double>(shards->size());
      const double v_tilde = detail::normalized_violation(acc, dc->ell_tilde * inner);
      rep.note_max("ell_tilde", v_tilde);
      rep.observe(v_tilde);
    }
  }
  return rep.finish();
}

/// E[Q(x)] = x and E||Q(x) - x||^2 <= omega ||x||^2, with equality required
/// for RandK.
inline CheckReport check_quantizer(const Quantizer& q, Index d, CheckMode mode, std::size_t trials = 100,
                                   std::uint64_t seed = 0, std::size_t samples = 100000,
                                   double tolerance = 1e-12) {
  CheckReport rep{std::string("quantizer/") + to_string(q.kind), mode, 0, -kInfinity,
                  mode == CheckMode::Exact ? tolerance : 0.0, true, {}};
  const double om = omega(q, d);
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const Vector x = gaussian_vector(rng, d);
    Vector mean = Vector::Zero(d);
    double var = 0.0;
    double var_sq = 0.0;
    std::size_t count = 0;
    if (mode == CheckMode::Exact) {
      for (const auto& o : enumerate_compress(q, x)) {
        mean += o.probability * o.value;
        var += o.probability * (o.value - x).squaredNorm();
      }
    } else {
      for (std::size_t s = 0; s < samples; ++s) {
        const Vector v = compress(q, x, rng).densify();
        mean += v;
        const double e = (v - x).squaredNorm();
        var += e;
        var_sq += e * e;
      }
      count = samples;
      mean /= static_cast<double>(count);
      var /= static_cast<double>(count);
      var_sq /= static_cast<double>(count);
    }
    const double target = om * x.squaredNorm();
    double bias = (mean - x).norm();
    double gap = q.kind == QuantizerKind::RandK ? std::abs(var - target) : var - target;
    if (mode == CheckMode::MonteCarlo) {
      bias -= 3.0 * std::sqrt(var / static_cast<double>(count));
      gap -= 3.0 * std::sqrt(std::max(var_sq - var * var, 0.0) / static_cast<double>(count));
    }
    rep.note_max("bias", bias);
    rep.note_max("variance_gap", gap / std::max(1.0, target));
    rep.observe(std::max(bias, gap / std::max(1.0, target)));
  }
  return rep.finish();
}

struct RateFit {
  double rate = 1.0;
  double r_squared = 1.0;
};

/// Least-squares fit of log(value) against k, exponentiated.
inline RateFit fit_linear_rate(const std::vector<double>& ks, const std::vector<double>& values) {
  detail::require(ks.size() == values.size() && ks.size() >= 2, "fit_linear_rate: need at least two points");
  const double n = static_cast<double>(ks.size());
  double sk = 0.0, sy = 0.0;
  std::vector<double> ys;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(values[i] > 0.0))
      throw NumericalError("fit_linear_rate: nonpositive value in window (saturated at float precision)");
    ys.push_back(std::log(values[i]));
    sk += ks[i];
    sy += ys.back();
  }
  const double mk = sk / n, my = sy / n;
  double skk = 0.0, sky = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    skk += (ks[i] - mk) * (ks[i] - mk);
    sky += (ks[i] - mk) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  detail::require(skk > 0.0, "fit_linear_rate: k values must not all coincide");
  const double slope = sky / skk;
  RateFit fit;
  fit.rate = std::exp(slope);
  fit.r_squared = syy > 0.0 ? (slope * sky) / syy : 1.0;
  return fit;
}

/// Fit over trace rows [first, first + window) using dist_sq.
inline RateFit fit_linear_rate(const RunTrace& trace, std::size_t first, std::size_t window) {
  detail::require(first + window <= trace.rows.size(), "fit_linear_rate: window exceeds trace");
  std::vector<double> ks, vs;
  for (std::size_t i = first; i < first + window; ++i) {
    ks.push_back(static_cast<double>(trace.rows[i].k));
    vs.push_back(trace.rows[i].dist_sq);
  }
  return fit_linear_rate(ks, vs);
}

}  // namespace vilab
