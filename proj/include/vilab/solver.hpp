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
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vilab/core.hpp"
#include "vilab/distributed.hpp"
#include "vilab/estimators.hpp"
#include "vilab/problem.hpp"

namespace vilab {

// -----------------------------------------------------------------------------
// Step sizes

struct ConstantStep {
  double gamma = 0.0;
};

/// Constant 1/h for the first half of the horizon, then 2 / (a (kappa + k - k0)).
struct StichDecreasing {
  double h = 0.0;
  double a = 0.0;
  std::size_t K = 0;
};

using StepsizeSchedule = std::variant<ConstantStep, StichDecreasing>;

inline void validate_schedule(const StepsizeSchedule& s) {
  if (const auto* c = std::get_if<ConstantStep>(&s)) {
    detail::require(c->gamma > 0.0 && std::isfinite(c->gamma), "ConstantStep: gamma must be positive");
  } else {
    const auto& d = std::get<StichDecreasing>(s);
    detail::require(d.a > 0.0 && d.h >= d.a, "StichDecreasing: need h >= a > 0");
    detail::require(d.K >= 1, "StichDecreasing: horizon must be >= 1");
  }
}

inline double stepsize_at(const StepsizeSchedule& s, std::size_t k) {
  validate_schedule(s);
  if (const auto* c = std::get_if<ConstantStep>(&s)) return c->gamma;
  const auto& d = std::get<StichDecreasing>(s);
  if (k >= d.K) throw std::out_of_range("stepsize_at: k beyond the schedule horizon");
  const double K = static_cast<double>(d.K);
  if (K <= d.h / d.a) return 1.0 / d.h;
  const std::size_t k0 = (d.K + 1) / 2;
  if (k < k0) return 1.0 / d.h;
  const double kappa = 2.0 * d.h / d.a;
  return 2.0 / (d.a * (kappa + static_cast<double>(k - k0)));
}

/// Largest admissible constant step min{1/mu, 1/(2(A + C M))}.
inline double theory_stepsize(const TheoryParams& tp, double mu) {
  tp.validate();
  detail::require(mu > 0.0, "theory_stepsize: mu must be positive");
  const double denom = 2.0 * (tp.A + tp.C * tp.M);
  return denom > 0.0 ? std::min(1.0 / mu, 1.0 / denom) : 1.0 / mu;
}

/// Decreasing schedule with h = max{2(A + 2BC/rho), 2 mu/rho}, a = mu.
inline StichDecreasing decreasing_schedule(const TheoryParams& tp, double mu, std::size_t K) {
  tp.validate();
  detail::require(mu > 0.0, "decreasing_schedule: mu must be positive");
  const double h = std::max(2.0 * (tp.A + 2.0 * tp.B * tp.C / tp.rho), 2.0 * mu / tp.rho);
  return {h, mu, K};
}

// -----------------------------------------------------------------------------
// Update and envelope

inline Vector prox_step(const Vector& x, const Vector& g, double gamma, const Regularizer& reg) {
  detail::require(gamma > 0.0, "prox_step: gamma must be positive");
  detail::require(x.size() == g.size(), "prox_step: dimension mismatch");
  return reg.prox(gamma, x - gamma * g);
}

inline double lyapunov(double dist_sq, double sigma_sq, double M, double gamma) {
  detail::require(dist_sq >= 0.0 && sigma_sq >= 0.0 && M >= 0.0, "lyapunov: inputs must be nonnegative");
  return dist_sq + M * gamma * gamma * sigma_sq;
}

/// Contraction rate min{gamma mu, rho - B/M} of the Lyapunov function.
inline double envelope_rate(const TheoryParams& tp, double mu, double gamma) {
  const double vr = tp.B > 0.0 ? tp.rho - tp.B / tp.M : tp.rho;
  return std::min(gamma * mu, vr);
}

/// Upper bound on E V_k for a constant step. Throws if gamma or M violate
/// the admissibility conditions.
inline double theoretical_envelope(const TheoryParams& tp, double mu, double gamma, double V0,
                                   std::size_t k) {
  detail::require(mu > 0.0 && gamma > 0.0 && V0 >= 0.0, "theoretical_envelope: invalid inputs");
  if (tp.B > 0.0 && !(tp.M > tp.B / tp.rho))
    throw std::invalid_argument("theoretical_envelope: M must exceed B / rho");
  const double bound = std::min(1.0 / mu, 1.0 / (2.0 * (tp.A + tp.C * tp.M)));
  if (gamma > bound * (1.0 + 1e-12))
    throw std::invalid_argument("theoretical_envelope: gamma " + to_decimal(gamma) +
                                " exceeds admissible bound " + to_decimal(bound));
  const double q = envelope_rate(tp, mu, gamma);
  return std::pow(1.0 - q, static_cast<double>(k)) * V0 + gamma * gamma * (tp.D1 + tp.M * tp.D2) / q;
}

// -----------------------------------------------------------------------------
// Restricted gap

/// l_inf ball used as the compact set of the gap function.
struct BoxSet {
  Vector center;
  double radius = 0.0;

  BoxSet(Vector c, double r) : center(std::move(c)), radius(r) {
    detail::require(r > 0.0 && std::isfinite(r), "BoxSet: radius must be positive and finite");
  }

  /// Radius 2 ||x0 - x*||_inf around x* (1 if x0 = x*).
  static BoxSet around_solution(const Vector& x_star, const Vector& x0) {
    const double r = 2.0 * (x0 - x_star).cwiseAbs().maxCoeff();
    return {x_star, r > 0.0 ? r : 1.0};
  }

  bool contains(const Vector& x) const {
    return (x - center).cwiseAbs().maxCoeff() <= radius * (1.0 + 1e-12);
  }
};

struct GapResult {
  double value = 0.0;
  bool approximate = false;
  std::size_t iterations = 0;
};

namespace detail {

struct GapObjective {
  const Matrix& a;
  const Vector& b;
  const Regularizer& reg;
  const Vector& z;
  double rz;
  Vector lo, hi;

  double value(const Vector& u) const {
    return (a * u + b).dot(z - u) + rz - reg.weight() * u.lpNorm<1>();
  }
  Vector grad(const Vector& u) const { return a.transpose() * z - (a + a.transpose()) * u - b; }
  Vector project(const Vector& u) const { return u.cwiseMax(lo).cwiseMin(hi); }
  Vector prox(const Vector& v, double eta) const {
    const double s = eta * reg.weight();
    Vector out(v.size());
    for (Index j = 0; j < v.size(); ++j) {
      const double m = std::max(std::abs(v(j)) - s, 0.0);
      out(j) = v(j) > 0 ? m : -m;
    }
    return project(out);
  }
};

}  // namespace detail

/// max over u in box and dom R of <F(u), z - u> + R(z) - R(u), by
/// accelerated proximal ascent from several starts. The returned value is
/// attained at a feasible point, so it never exceeds the true maximum.
inline GapResult restricted_gap(const ProblemInstance& problem, const BoxSet& box, const Vector& z,
                                double tol = 1e-10, std::size_t budget = 20000) {
  detail::require_dim(z, problem.dim(), "restricted_gap");
  detail::require_dim(box.center, problem.dim(), "restricted_gap");
  if (problem.x_star && !box.contains(*problem.x_star))
    throw std::invalid_argument("restricted_gap: box does not contain the reference solution");
  const double rz = problem.reg.value(z);
  if (std::isinf(rz)) return {kInfinity, false, 0};

  const Matrix& a = problem.op.mean_matrix();
  const Index d = problem.dim();
  const double r = problem.reg.box();
  detail::GapObjective obj{a, problem.op.mean_offset(), problem.reg, z, rz, Vector(d), Vector(d)};
  for (Index j = 0; j < d; ++j) {
    obj.lo(j) = std::max(box.center(j) - box.radius, -r);
    obj.hi(j) = std::min(box.center(j) + box.radius, r);
    detail::require(obj.lo(j) <= obj.hi(j), "restricted_gap: box misses the regularizer domain");
  }
  const double lmax = std::max(
      Eigen::SelfAdjointEigenSolver<Matrix>(symmetric_part(a), Eigen::EigenvaluesOnly).eigenvalues().maxCoeff(),
      0.0);
  const double eta = 1.0 / std::max(2.0 * lmax, 1e-12);

  std::vector<Vector> cands;
  cands.push_back(obj.project(box.center));
  cands.push_back(obj.project(z));
  for (Index j = 0; j < d; ++j) {
    Vector e = box.center;
    e(j) += box.radius;
    cands.push_back(obj.project(e));
    e(j) -= 2.0 * box.radius;
    cands.push_back(obj.project(e));
  }
  GapResult res{-kInfinity, true, 0};
  std::size_t best_idx = 0;
  for (std::size_t c = 0; c < cands.size(); ++c) {
    const double v = obj.value(cands[c]);
    if (v > res.value) {
      res.value = v;
      best_idx = c;
    }
  }
  std::vector<Vector> starts{cands[best_idx], cands[1]};
  if (problem.x_star) starts.push_back(obj.project(*problem.x_star));

  bool all_converged = true;
  const std::size_t per_start = std::max<std::size_t>(1, budget / starts.size());
  for (const Vector& s : starts) {
    Vector u = s, y = s;
    double t = 1.0;
    double fu = obj.value(u);
    bool converged = false;
    for (std::size_t it = 0; it < per_start; ++it) {
      ++res.iterations;
      const Vector un = obj.prox(y + eta * obj.grad(y), eta);
      const double fn = obj.value(un);
      // Gradient mapping at u, the certificate of stationarity.
      const Vector gm = (u - obj.prox(u + eta * obj.grad(u), eta)) / eta;
      if (gm.norm() <= tol) {
        converged = true;
        break;
      }
      if (fn < fu) {  // adaptive restart keeps the ascent monotone
        y = u;
        t = 1.0;
        continue;
      }
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = un + ((t - 1.0) / tn) * (un - u);
      u = un;
      fu = fn;
      t = tn;
    }
    res.value = std::max(res.value, fu);
    all_converged = all_converged && converged;
  }
  res.approximate = !all_converged;
  return res;
}

// -----------------------------------------------------------------------------
// Generic loop

/// A compressed multi-worker method together with its topology.
struct DistributedSpec {
  DistributedConfig config;
  std::size_t n_workers = 1;
  std::vector<double> noise_sigma{0.0};
};

using MethodSpec = std::variant<EstimatorKind, DistributedSpec>;

inline std::string method_name(const MethodSpec& m) {
  if (const auto* e = std::get_if<EstimatorKind>(&m)) return estimator_name(*e);
  return to_string(std::get<DistributedSpec>(m).config.method);
}

struct RunOptions {
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  /// Record every s-th iterate (the last iterate is always recorded).
  std::size_t record_every = 1;
  /// Stop once cumulative oracle calls reach this value (0 disables).
  std::uint64_t max_oracle_calls = 0;
  bool track_sigma = true;
  bool keep_iterates = false;
  /// Lyapunov weight; unset means 2B/rho from the certified constants.
  std::optional<double> lyapunov_M;
  CoordinateAccounting coordinate_accounting = CoordinateAccounting::PerCoordinate;
  /// Gap of the running average on this box at recorded rows.
  std::optional<BoxSet> gap_box;
  double gap_tol = 1e-10;
  std::size_t gap_budget = 20000;
};

struct TraceRow {
  std::size_t k = 0;
  double gamma = 0.0;
  double dist_sq = 0.0;
  double lyapunov = 0.0;
  std::optional<double> sigma_sq;
  std::uint64_t oracle_calls = 0;
  std::uint64_t uplink_bits = 0;
  std::optional<double> gap;
  std::optional<Vector> x;
};

struct RunTrace {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;
  bool diverged = false;
  std::size_t divergence_iteration = 0;
  Vector final_x;
  Vector average_x;
  double lyapunov_M = 0.0;
};

namespace detail {

// Uniform driver over single-node and distributed estimators.
class MethodRunner {
 public:
  MethodRunner(const MethodSpec& spec, const ProblemInstance& problem, const Vector& x0,
               CoordinateAccounting acc)
      : spec_(spec), problem_(problem), acc_(acc) {
    if (const auto* e = std::get_if<EstimatorKind>(&spec_)) {
      auto init = init_estimator(*e, problem.op, x0);
      state_ = std::move(init.state);
      ledger_.oracle_calls = init.oracle_calls;
    } else {
      auto& ds = std::get<DistributedSpec>(spec_);
      shards_ = partition(problem.op, ds.n_workers);
      set_noise(shards_, ds.noise_sigma);
      auto init = init_distributed(ds.config, shards_, x0);
      dstate_ = std::move(init.state);
      ledger_.oracle_calls = init.oracle_calls;
    }
    if (problem.x_star) {
      if (is_distributed())
        dref_ = DistributedReference::build(shards_, *problem.x_star);
      else
        ref_ = ReferenceCache::build(problem);
    }
  }

  bool is_distributed() const { return std::holds_alternative<DistributedSpec>(spec_); }

  Vector sample(const Vector& x, Rng& rng) {
    if (const auto* e = std::get_if<EstimatorKind>(&spec_)) {
      auto s = sample_gradient(*e, state_, problem_.op, x, rng, acc_);
      ledger_.oracle_calls += s.oracle_calls;
      return std::move(s.g);
    }
    return aggregate_round(std::get<DistributedSpec>(spec_).config, dstate_, shards_, x, rng, ledger_);
  }

  std::optional<double> sigma() const {
    if (is_distributed()) {
      if (!dref_) return std::nullopt;
      return distributed_sigma_sq(dstate_, shards_, *dref_);
    }
    if (!ref_) return std::nullopt;
    return sigma_sq(std::get<EstimatorKind>(spec_), state_, problem_.op, *ref_);
  }

  TheoryParams theory() const {
    if (const auto* e = std::get_if<EstimatorKind>(&spec_)) return theory_params(*e, problem_);
    return distributed_theory_params(std::get<DistributedSpec>(spec_).config, problem_, shards_);
  }

  const CommLedger& ledger() const { return ledger_; }

 private:
  MethodSpec spec_;
  const ProblemInstance& problem_;
  CoordinateAccounting acc_;
  EstimatorState state_;
  std::vector<WorkerShard> shards_;
  DistributedState dstate_;
  CommLedger ledger_;
  std::optional<ReferenceCache> ref_;
  std::optional<DistributedReference> dref_;
};

}  // namespace detail

/// Runs the proximal loop x <- prox_{gamma_k R}(x - gamma_k g_k). Row k
/// describes x^k and the step gamma_k that will be applied to it.
inline RunTrace run(const ProblemInstance& problem, const MethodSpec& method,
                    const StepsizeSchedule& schedule, const Vector& x0, const RunOptions& opt) {
  validate_schedule(schedule);
  detail::require_dim(x0, problem.dim(), "run");
  detail::require(opt.record_every >= 1, "run: record_every must be >= 1");
  if (opt.gap_box) detail::require_dim(opt.gap_box->center, problem.dim(), "run: gap box");
  if (const auto* sd = std::get_if<StichDecreasing>(&schedule))
    detail::require(sd->K >= opt.iterations, "run: decreasing schedule horizon shorter than the run");

  detail::MethodRunner runner(method, problem, x0, opt.coordinate_accounting);
  RunTrace trace;
  trace.method = method_name(method);
  trace.seed = opt.seed;
  const bool have_solution = problem.x_star.has_value();
  if (opt.lyapunov_M) {
    trace.lyapunov_M = *opt.lyapunov_M;
  } else if (problem.constants && have_solution) {
    trace.lyapunov_M = runner.theory().M;
  }

  Rng rng(opt.seed);
  Vector x = x0;
  Vector avg = x0;
  std::size_t avg_count = 0;

  auto record = [&](std::size_t k, double gamma) {
    TraceRow row;
    row.k = k;
    row.gamma = gamma;
    row.oracle_calls = runner.ledger().oracle_calls;
    row.uplink_bits = runner.ledger().uplink_bits;
    if (have_solution) {
      row.dist_sq = (x - *problem.x_star).squaredNorm();
      if (opt.track_sigma) row.sigma_sq = runner.sigma();
      row.lyapunov = lyapunov(row.dist_sq, row.sigma_sq.value_or(0.0), trace.lyapunov_M, gamma);
    } else {
      row.dist_sq = std::numeric_limits<double>::quiet_NaN();
      row.lyapunov = std::numeric_limits<double>::quiet_NaN();
    }
    if (opt.gap_box) row.gap = restricted_gap(problem, *opt.gap_box, avg, opt.gap_tol, opt.gap_budget).value;
    if (opt.keep_iterates) row.x = x;
    trace.rows.push_back(std::move(row));
  };

  const auto next_gamma = [&](std::size_t k) {
    if (const auto* sd = std::get_if<StichDecreasing>(&schedule))
      return stepsize_at(schedule, std::min(k, sd->K - 1));
    return stepsize_at(schedule, k);
  };

  record(0, next_gamma(0));
  for (std::size_t k = 0; k < opt.iterations; ++k) {
    if (opt.max_oracle_calls > 0 && runner.ledger().oracle_calls >= opt.max_oracle_calls) break;
    const double gamma = stepsize_at(schedule, k);
    const Vector g = runner.sample(x, rng);
    x = prox_step(x, g, gamma, problem.reg);
    if (!x.allFinite()) {
      trace.diverged = true;
      trace.divergence_iteration = k + 1;
      break;
    }
    ++avg_count;
    avg += (x - avg) / static_cast<double>(avg_count);
    const bool last = k + 1 == opt.iterations ||
                      (opt.max_oracle_calls > 0 && runner.ledger().oracle_calls >= opt.max_oracle_calls);
    if ((k + 1) % opt.record_every == 0 || last) record(k + 1, next_gamma(k + 1));
  }
  trace.final_x = x;
  trace.average_x = avg;
  return trace;
}

}  // namespace vilab
