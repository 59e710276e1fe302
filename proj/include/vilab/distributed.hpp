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
#include <string>
#include <vector>

#include "vilab/compression.hpp"
#include "vilab/core.hpp"
#include "vilab/estimators.hpp"
#include "vilab/problem.hpp"

namespace vilab {

/// Worker i's slice of the finite sum.
///
/// The worker operator is weight * (1/m) sum_j (A_j x + b_j) with
/// weight = n_workers * m / N, so that the plain mean of worker operators is F
/// even when shards have unequal sizes. For equal shards weight = 1.
class WorkerShard {
 public:
  WorkerShard(std::vector<AffineComponent> components, double weight, double noise_sigma = 0.0)
      : components_(std::move(components)), weight_(weight), noise_sigma_(noise_sigma) {
    detail::require(!components_.empty(), "WorkerShard: need at least one component");
    detail::require(weight > 0.0, "WorkerShard: weight must be positive");
    detail::require(noise_sigma >= 0.0, "WorkerShard: noise_sigma must be nonnegative");
    const Index d = components_.front().offset.size();
    local_matrix_ = Matrix::Zero(d, d);
    local_offset_ = Vector::Zero(d);
    for (const auto& c : components_) {
      local_matrix_ += c.matrix;
      local_offset_ += c.offset;
    }
    const double s = weight_ / static_cast<double>(components_.size());
    local_matrix_ *= s;
    local_offset_ *= s;
  }

  std::size_t size() const { return components_.size(); }
  Index dim() const { return local_offset_.size(); }
  double weight() const { return weight_; }
  double noise_sigma() const { return noise_sigma_; }
  void set_noise_sigma(double s) {
    detail::require(s >= 0.0, "WorkerShard: noise_sigma must be nonnegative");
    noise_sigma_ = s;
  }
  const std::vector<AffineComponent>& components() const { return components_; }
  const Matrix& local_matrix() const { return local_matrix_; }

  /// Worker operator F_i(x).
  Vector eval_local(const Vector& x) const { return local_matrix_ * x + local_offset_; }

  /// Scaled piece F_ij(x) = weight * (A_j x + b_j); F_i is the mean of these.
  Vector eval_piece(std::size_t j, const Vector& x) const {
    return weight_ * components_.at(j).eval(x);
  }

 private:
  std::vector<AffineComponent> components_;
  double weight_ = 1.0;
  double noise_sigma_ = 0.0;
  Matrix local_matrix_;
  Vector local_offset_;
};

/// Contiguous split of the components; the last worker takes the remainder.
inline std::vector<WorkerShard> partition(const FiniteSumOperator& op, std::size_t n_workers) {
  detail::require(n_workers >= 1, "partition: need at least one worker");
  detail::require(n_workers <= op.size(), "partition: more workers than components");
  const std::size_t total = op.size();
  const std::size_t base = total / n_workers;
  std::vector<WorkerShard> shards;
  shards.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    const std::size_t begin = w * base;
    const std::size_t end = (w + 1 == n_workers) ? total : begin + base;
    std::vector<AffineComponent> comps(op.components().begin() + static_cast<std::ptrdiff_t>(begin),
                                       op.components().begin() + static_cast<std::ptrdiff_t>(end));
    const double weight = static_cast<double>(n_workers) * static_cast<double>(end - begin) /
                          static_cast<double>(total);
    shards.emplace_back(std::move(comps), weight);
  }
  return shards;
}

inline void set_noise(std::vector<WorkerShard>& shards, const std::vector<double>& sigma) {
  detail::require(sigma.size() == 1 || sigma.size() == shards.size(),
                  "set_noise: sigma_i must be a scalar or one value per worker");
  for (std::size_t i = 0; i < shards.size(); ++i)
    shards[i].set_noise_sigma(sigma.size() == 1 ? sigma[0] : sigma[i]);
}

// -----------------------------------------------------------------------------
// Methods and state

enum class DistributedMethod { Qsgda, Diana, VrDiana };

inline const char* to_string(DistributedMethod m) {
  switch (m) {
    case DistributedMethod::Qsgda: return "qsgda";
    case DistributedMethod::Diana: return "diana";
    case DistributedMethod::VrDiana: return "vr_diana";
  }
  return "?";
}

/// Local oracle of a worker. Exact and Noisy serve Qsgda/Diana; Loopless is
/// the per-worker L-SVRG estimator of VrDiana.
enum class LocalMode { Exact, Noisy, Loopless };

struct DistributedConfig {
  DistributedMethod method = DistributedMethod::Qsgda;
  Quantizer quantizer;
  /// Shift step; NaN selects the default for the method.
  double alpha = std::numeric_limits<double>::quiet_NaN();
  /// Anchor restart probability for VrDiana; NaN selects 1/m.
  double p = std::numeric_limits<double>::quiet_NaN();
  /// One restart coin for all workers instead of independent coins.
  bool shared_coin = false;
  int value_bits = 64;
};

struct CommLedger {
  std::uint64_t rounds = 0;
  std::uint64_t uplink_bits = 0;
  std::uint64_t oracle_calls = 0;
};

struct DistributedState {
  DistributedMethod method = DistributedMethod::Qsgda;
  std::vector<Vector> h_i;
  Vector h;
  std::vector<Vector> w_i;
  std::vector<Vector> w_value;  // F_i(w_i)
  double alpha = 0.0;
  double p = 1.0;
};

inline std::size_t mean_shard_size(const std::vector<WorkerShard>& shards) {
  std::size_t total = 0;
  for (const auto& s : shards) total += s.size();
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(
                                      static_cast<double>(total) / static_cast<double>(shards.size()))));
}

inline LocalMode local_mode(DistributedMethod method, const std::vector<WorkerShard>& shards) {
  bool noisy = false;
  for (const auto& s : shards) noisy = noisy || s.noise_sigma() > 0.0;
  if (method == DistributedMethod::VrDiana) {
    if (noisy) throw ConfigError("vr_diana does not combine Gaussian noise with loopless local estimators");
    return LocalMode::Loopless;
  }
  return noisy ? LocalMode::Noisy : LocalMode::Exact;
}

/// Resolves defaults and validates alpha and p.
inline void resolve_parameters(DistributedConfig& cfg, const std::vector<WorkerShard>& shards) {
  detail::require(!shards.empty(), "distributed: no workers");
  const Index d = shards.front().dim();
  const double om = omega(cfg.quantizer, d);
  const double m = static_cast<double>(mean_shard_size(shards));
  if (cfg.method == DistributedMethod::VrDiana) {
    if (std::isnan(cfg.p)) cfg.p = 1.0 / m;
    detail::require(cfg.p > 0.0 && cfg.p <= 1.0, "vr_diana: p must lie in (0, 1]");
    if (std::isnan(cfg.alpha)) cfg.alpha = std::min(1.0 / (3.0 * m), 1.0 / (1.0 + om));
    detail::require(cfg.alpha > 0.0 && cfg.alpha <= std::min(cfg.p / 3.0, 1.0 / (1.0 + om)) * (1.0 + 1e-12),
                    "vr_diana: alpha must lie in (0, min{p/3, 1/(1+omega)}]");
  } else if (cfg.method == DistributedMethod::Diana) {
    if (std::isnan(cfg.alpha)) cfg.alpha = 1.0 / (1.0 + om);
    detail::require(cfg.alpha > 0.0 && cfg.alpha <= (1.0 / (1.0 + om)) * (1.0 + 1e-12),
                    "diana: alpha must lie in (0, 1/(1+omega)]");
  } else {
    if (std::isnan(cfg.alpha)) cfg.alpha = 0.0;
  }
  if (std::isnan(cfg.p)) cfg.p = 1.0;
}

struct DistributedInit {
  DistributedState state;
  std::uint64_t oracle_calls = 0;
};

/// Shifts start at zero; VrDiana anchors start at x0 (m_i calls per worker).
inline DistributedInit init_distributed(DistributedConfig& cfg, const std::vector<WorkerShard>& shards,
                                        const Vector& x0) {
  resolve_parameters(cfg, shards);
  local_mode(cfg.method, shards);
  DistributedInit r;
  DistributedState& s = r.state;
  s.method = cfg.method;
  s.alpha = cfg.alpha;
  s.p = cfg.p;
  const Index d = shards.front().dim();
  detail::require_dim(x0, d, "init_distributed");
  if (cfg.method != DistributedMethod::Qsgda) {
    s.h_i.assign(shards.size(), Vector::Zero(d));
    s.h = Vector::Zero(d);
  }
  if (cfg.method == DistributedMethod::VrDiana) {
    for (const auto& sh : shards) {
      s.w_i.push_back(x0);
      s.w_value.push_back(sh.eval_local(x0));
      r.oracle_calls += sh.size();
    }
  }
  return r;
}

struct LocalSample {
  Vector g;
  std::uint64_t calls = 0;
};

/// Exact: F_i(x). Noisy: F_i(x) + sigma_i zeta with zeta ~ N(0, I/d).
inline LocalSample local_gradient(const WorkerShard& shard, const Vector& x, LocalMode mode, Rng& rng) {
  detail::require(mode != LocalMode::Loopless, "local_gradient: loopless mode needs worker state");
  LocalSample s{shard.eval_local(x), shard.size()};
  if (mode == LocalMode::Noisy && shard.noise_sigma() > 0.0) {
    const double sd = shard.noise_sigma() / std::sqrt(static_cast<double>(shard.dim()));
    s.g += gaussian_vector(rng, shard.dim(), sd);
  }
  return s;
}

/// Loopless local estimator F_ij(x) - F_ij(w) + F_i(w). When `restart` is
/// set the anchor moves to x after the sample is formed.
inline LocalSample loopless_local_gradient(const WorkerShard& shard, const Vector& x, Vector& w,
                                           Vector& w_value, std::size_t j, bool restart) {
  LocalSample s{shard.eval_piece(j, x) - shard.eval_piece(j, w) + w_value, 2};
  if (restart) {
    w = x;
    w_value = shard.eval_local(x);
    s.calls += shard.size();
  }
  return s;
}

/// One synchronous round: every worker forms its local estimate, compresses
/// and uploads; the server aggregates. Workers run in index order on one
/// shared random stream.
inline Vector aggregate_round(const DistributedConfig& cfg, DistributedState& state,
                              const std::vector<WorkerShard>& shards, const Vector& x, Rng& rng,
                              CommLedger& ledger) {
  detail::require(state.method == cfg.method, "aggregate_round: state does not match method");
  const std::size_t nw = shards.size();
  const Index d = shards.front().dim();
  detail::require_dim(x, d, "aggregate_round");
  const LocalMode mode = local_mode(cfg.method, shards);
  const bool shifted = cfg.method != DistributedMethod::Qsgda;
  if (shifted)
    detail::require(state.h_i.size() == nw, "aggregate_round: shift count does not match workers");

  bool shared_restart = false;
  if (mode == LocalMode::Loopless && cfg.shared_coin) shared_restart = coin(rng, state.p);

  Vector sum = Vector::Zero(d);
  for (std::size_t i = 0; i < nw; ++i) {
    LocalSample ls;
    if (mode == LocalMode::Loopless) {
      const std::size_t j = uniform_index(rng, shards[i].size());
      const bool restart = cfg.shared_coin ? shared_restart : coin(rng, state.p);
      ls = loopless_local_gradient(shards[i], x, state.w_i[i], state.w_value[i], j, restart);
    } else {
      ls = local_gradient(shards[i], x, mode, rng);
    }
    ledger.oracle_calls += ls.calls;
    const CompressedVector msg = compress(cfg.quantizer, shifted ? Vector(ls.g - state.h_i[i]) : ls.g, rng);
    ledger.uplink_bits += encoded_bits(msg, cfg.value_bits);
    const Vector q = msg.densify();
    sum += q;
    if (shifted) state.h_i[i] += state.alpha * q;
  }
  ++ledger.rounds;
  const Vector mean = sum / static_cast<double>(nw);
  if (!shifted) return mean;
  Vector g = state.h + mean;
  state.h += state.alpha * mean;
  return g;
}

struct RoundOutcome {
  double probability;
  Vector g;
  DistributedState next;
};

/// Every outcome of one round (Exact or Loopless locals, enumerable
/// quantizer). The input state is not modified.
inline std::vector<RoundOutcome> enumerate_round(const DistributedConfig& cfg,
                                                 const DistributedState& state,
                                                 const std::vector<WorkerShard>& shards,
                                                 const Vector& x, std::size_t max_outcomes = 200000) {
  const LocalMode mode = local_mode(cfg.method, shards);
  if (mode == LocalMode::Noisy)
    throw std::invalid_argument("enumerate_round: Gaussian noise cannot be enumerated");
  detail::require(!(mode == LocalMode::Loopless && cfg.shared_coin),
                  "enumerate_round: shared coin is not enumerated");
  const bool shifted = cfg.method != DistributedMethod::Qsgda;
  const std::size_t nw = shards.size();

  struct WorkerOutcome {
    double probability;
    Vector q;
    Vector w;
    Vector w_value;
  };
  std::vector<std::vector<WorkerOutcome>> per_worker(nw);
  for (std::size_t i = 0; i < nw; ++i) {
    struct Local {
      double probability;
      Vector g;
      Vector w;
      Vector w_value;
    };
    std::vector<Local> locals;
    if (mode == LocalMode::Exact) {
      locals.push_back({1.0, shards[i].eval_local(x), {}, {}});
    } else {
      const double pj = 1.0 / static_cast<double>(shards[i].size());
      for (std::size_t j = 0; j < shards[i].size(); ++j) {
        for (int restart = 0; restart < 2; ++restart) {
          const double pc = restart ? state.p : 1.0 - state.p;
          if (pc <= 0.0) continue;
          Vector w = state.w_i[i];
          Vector wv = state.w_value[i];
          LocalSample ls = loopless_local_gradient(shards[i], x, w, wv, j, restart != 0);
          locals.push_back({pj * pc, std::move(ls.g), std::move(w), std::move(wv)});
        }
      }
    }
    for (auto& l : locals) {
      const Vector msg = shifted ? Vector(l.g - state.h_i[i]) : l.g;
      for (auto& qo : enumerate_compress(cfg.quantizer, msg))
        per_worker[i].push_back({l.probability * qo.probability, std::move(qo.value), l.w, l.w_value});
    }
  }
  double total = 1.0;
  for (const auto& pw : per_worker) total *= static_cast<double>(pw.size());
  detail::require(total <= static_cast<double>(max_outcomes), "enumerate_round: outcome space too large");

  std::vector<RoundOutcome> out;
  std::vector<std::size_t> pick(nw, 0);
  while (true) {
    RoundOutcome o{1.0, Vector::Zero(x.size()), state};
    Vector sum = Vector::Zero(x.size());
    for (std::size_t i = 0; i < nw; ++i) {
      const auto& wo = per_worker[i][pick[i]];
      o.probability *= wo.probability;
      sum += wo.q;
      if (shifted) o.next.h_i[i] += state.alpha * wo.q;
      if (mode == LocalMode::Loopless) {
        o.next.w_i[i] = wo.w;
        o.next.w_value[i] = wo.w_value;
      }
    }
    const Vector mean = sum / static_cast<double>(nw);
    if (shifted) {
      o.g = state.h + mean;
      o.next.h = state.h + state.alpha * mean;
    } else {
      o.g = mean;
    }
    out.push_back(std::move(o));
    std::size_t pos = 0;
    while (pos < nw && ++pick[pos] == per_worker[pos].size()) pick[pos++] = 0;
    if (pos == nw) break;
  }
  return out;
}

// -----------------------------------------------------------------------------
// Constants and theory

/// zeta_*^2 = (1/n_workers) sum_i ||F_i(x*)||^2.
inline double zeta_star_sq(const std::vector<WorkerShard>& shards, const Vector& x_star) {
  double acc = 0.0;
  for (const auto& s : shards) acc += s.eval_local(x_star).squaredNorm();
  return acc / static_cast<double>(shards.size());
}

inline double mean_noise_variance(const std::vector<WorkerShard>& shards) {
  double acc = 0.0;
  for (const auto& s : shards) acc += s.noise_sigma() * s.noise_sigma();
  return acc / static_cast<double>(shards.size());
}

struct DistributedConstants {
  double ell = 0.0;
  double ell_hat = 0.0;    // over worker operators
  double ell_tilde = 0.0;  // over all scaled shard pieces
  double mu = 0.0;
};

inline DistributedConstants distributed_constants(const ProblemInstance& problem,
                                                  const std::vector<WorkerShard>& shards) {
  const auto& c = problem.require_constants();
  DistributedConstants dc{c.ell, 0.0, 0.0, c.mu};
  const Matrix& abar = problem.op.mean_matrix();
  std::vector<const Matrix*> workers;
  for (const auto& s : shards) workers.push_back(&s.local_matrix());
  dc.ell_hat = averaged_star_cocoercivity(workers, abar);
  const Index d = problem.dim();
  Matrix gram = Matrix::Zero(d, d);
  for (const auto& s : shards) {
    Matrix local = Matrix::Zero(d, d);
    for (const auto& comp : s.components()) local.noalias() += comp.matrix.transpose() * comp.matrix;
    gram += (s.weight() * s.weight() / static_cast<double>(s.size())) * local;
  }
  gram /= static_cast<double>(shards.size());
  dc.ell_tilde = max_generalized_eigenvalue(gram, symmetric_part(abar));
  return dc;
}

/// Certified constants of the compressed methods. For VrDiana sigma_k^2
/// includes the anchor residuals. Unset alpha and p take their defaults.
inline TheoryParams distributed_theory_params(DistributedConfig resolved, const ProblemInstance& problem,
                                              const std::vector<WorkerShard>& shards) {
  resolve_parameters(resolved, shards);
  const DistributedConstants dc = distributed_constants(problem, shards);
  const double n = static_cast<double>(shards.size());
  const double om = omega(resolved.quantizer, problem.dim());
  const double s2 = mean_noise_variance(shards);
  switch (resolved.method) {
    case DistributedMethod::Qsgda: {
      const double z2 = zeta_star_sq(shards, problem.require_solution());
      return TheoryParams::make(1.5 * dc.ell + 4.5 * om * dc.ell_hat / n, 0, 0, 1,
                                (3.0 * (1.0 + 3.0 * om) * s2 + 9.0 * om * z2) / n, 0);
    }
    case DistributedMethod::Diana: {
      const double a = resolved.alpha;
      return TheoryParams::make((0.5 + om / n) * dc.ell_hat, 2.0 * om / n, a * dc.ell_hat / 2.0, a,
                                (1.0 + om) * s2 / n, a * s2);
    }
    case DistributedMethod::VrDiana: {
      const double a = resolved.alpha;
      const double lt = dc.ell_tilde;
      return TheoryParams::make(dc.ell / 2.0 + lt / n + om * (dc.ell_hat + lt) / n, 2.0 * (om + 1.0) / n,
                                resolved.p * lt / 2.0 + a * (lt + dc.ell_hat), a, 0, 0);
    }
  }
  return {};
}

/// Per-worker values at the solution.
struct DistributedReference {
  Vector x_star;
  std::vector<Vector> f_i_star;                // worker operators
  std::vector<std::vector<Vector>> f_ij_star;  // scaled pieces

  static DistributedReference build(const std::vector<WorkerShard>& shards, const Vector& x_star) {
    DistributedReference r;
    r.x_star = x_star;
    for (const auto& s : shards) {
      r.f_i_star.push_back(s.eval_local(x_star));
      std::vector<Vector> pieces;
      for (std::size_t j = 0; j < s.size(); ++j) pieces.push_back(s.eval_piece(j, x_star));
      r.f_ij_star.push_back(std::move(pieces));
    }
    return r;
  }
};

/// sigma_k^2: shift residuals (Diana, VrDiana) plus anchor residuals (VrDiana).
inline double distributed_sigma_sq(const DistributedState& state, const std::vector<WorkerShard>& shards,
                                   const DistributedReference& ref) {
  if (state.method == DistributedMethod::Qsgda) return 0.0;
  const double n = static_cast<double>(shards.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < shards.size(); ++i) acc += (state.h_i[i] - ref.f_i_star[i]).squaredNorm();
  acc /= n;
  if (state.method == DistributedMethod::VrDiana) {
    double anchors = 0.0;
    for (std::size_t i = 0; i < shards.size(); ++i) {
      double local = 0.0;
      for (std::size_t j = 0; j < shards[i].size(); ++j)
        local += (shards[i].eval_piece(j, state.w_i[i]) - ref.f_ij_star[i][j]).squaredNorm();
      anchors += local / static_cast<double>(shards[i].size());
    }
    acc += anchors / n;
  }
  return acc;
}

/// Random shifts and anchors around the solution for verification sweeps.
inline DistributedState random_distributed_state(const DistributedConfig& resolved,
                                                 const std::vector<WorkerShard>& shards,
                                                 const DistributedReference& ref, double spread, Rng& rng) {
  DistributedState s;
  s.method = resolved.method;
  s.alpha = resolved.alpha;
  s.p = resolved.p;
  const Index d = ref.x_star.size();
  if (resolved.method == DistributedMethod::Qsgda) return s;
  s.h = Vector::Zero(d);
  for (std::size_t i = 0; i < shards.size(); ++i) {
    s.h_i.push_back(ref.f_i_star[i] + gaussian_vector(rng, d, spread));
    s.h += s.h_i.back();
  }
  s.h /= static_cast<double>(shards.size());
  if (resolved.method == DistributedMethod::VrDiana) {
    for (const auto& sh : shards) {
      s.w_i.push_back(ref.x_star + gaussian_vector(rng, d, spread));
      s.w_value.push_back(sh.eval_local(s.w_i.back()));
    }
  }
  return s;
}

}  // namespace vilab
