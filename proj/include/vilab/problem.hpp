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
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "vilab/core.hpp"

namespace vilab {

/// One affine piece F_i(x) = A_i x + b_i of a finite-sum operator.
struct AffineComponent {
  Matrix matrix;
  Vector offset;

  Vector eval(const Vector& x) const { return matrix * x + offset; }
};

/// F(x) = (1/n) sum_i (A_i x + b_i).
///
/// Immutable after construction. The mean matrix and offset are cached, so a
/// full evaluation costs one d x d mat-vec; callers still account it as n
/// oracle calls.
class FiniteSumOperator {
 public:
  FiniteSumOperator() = default;

  explicit FiniteSumOperator(std::vector<AffineComponent> components)
      : components_(std::move(components)) {
    detail::require(!components_.empty(), "FiniteSumOperator: need at least one component");
    dim_ = components_.front().offset.size();
    detail::require(dim_ > 0, "FiniteSumOperator: dimension must be positive");
    mean_matrix_ = Matrix::Zero(dim_, dim_);
    mean_offset_ = Vector::Zero(dim_);
    for (const auto& c : components_) {
      detail::require(c.matrix.rows() == dim_ && c.matrix.cols() == dim_ && c.offset.size() == dim_,
                      "FiniteSumOperator: component dimensions disagree");
      mean_matrix_ += c.matrix;
      mean_offset_ += c.offset;
    }
    const double inv_n = 1.0 / static_cast<double>(components_.size());
    mean_matrix_ *= inv_n;
    mean_offset_ *= inv_n;
  }

  Index dim() const { return dim_; }
  std::size_t size() const { return components_.size(); }
  const std::vector<AffineComponent>& components() const { return components_; }
  const AffineComponent& component(std::size_t i) const { return components_.at(i); }
  const Matrix& mean_matrix() const { return mean_matrix_; }
  const Vector& mean_offset() const { return mean_offset_; }

  Vector eval_component(std::size_t i, const Vector& x) const {
    if (i >= components_.size()) throw std::out_of_range("eval_component: index out of range");
    detail::require_dim(x, dim_, "eval_component");
    return components_[i].eval(x);
  }

  Vector eval_full(const Vector& x) const {
    detail::require_dim(x, dim_, "eval_full");
    return mean_matrix_ * x + mean_offset_;
  }

  /// j-th coordinate of F(x); the unit of work for coordinate methods.
  double eval_coordinate(Index j, const Vector& x) const {
    return mean_matrix_.row(j).dot(x) + mean_offset_(j);
  }

 private:
  std::vector<AffineComponent> components_;
  Index dim_ = 0;
  Matrix mean_matrix_;
  Vector mean_offset_;
};

// -----------------------------------------------------------------------------
// Regularizer

enum class RegularizerKind { None, L1Box };

/// R(x) = lambda ||x||_1 + indicator{||x||_inf <= radius}. An infinite radius
/// means no box.
struct Regularizer {
  RegularizerKind kind = RegularizerKind::None;
  double lambda = 0.0;
  double radius = kInfinity;

  static Regularizer none() { return {}; }

  static Regularizer l1_box(double lambda, double radius) {
    detail::require(lambda >= 0.0, "Regularizer: lambda must be nonnegative");
    detail::require(radius > 0.0, "Regularizer: radius must be positive");
    return {RegularizerKind::L1Box, lambda, radius};
  }

  /// True when the regularizer is identically zero.
  bool is_trivial() const {
    return kind == RegularizerKind::None || (lambda == 0.0 && std::isinf(radius));
  }

  double weight() const { return kind == RegularizerKind::None ? 0.0 : lambda; }
  double box() const { return kind == RegularizerKind::None ? kInfinity : radius; }

  bool in_domain(const Vector& x) const {
    return std::isinf(box()) || x.cwiseAbs().maxCoeff() <= box();
  }

  /// R(x); +inf outside the box.
  double value(const Vector& x) const {
    if (!in_domain(x)) return kInfinity;
    return weight() * x.lpNorm<1>();
  }

  /// prox_{gamma R}(x) = sign(x) min{max{|x| - gamma lambda, 0}, r}.
  Vector prox(double gamma, const Vector& x) const {
    detail::require(gamma > 0.0, "prox: gamma must be positive");
    if (kind == RegularizerKind::None) return x;
    const double shrink = gamma * lambda;
    Vector out(x.size());
    for (Index j = 0; j < x.size(); ++j) {
      const double mag = std::min(std::max(std::abs(x(j)) - shrink, 0.0), radius);
      out(j) = x(j) > 0 ? mag : (x(j) < 0 ? -mag : 0.0);
    }
    return out;
  }
};

// -----------------------------------------------------------------------------
// Problem constants

/// Monotonicity and (star-)cocoercivity constants of an affine finite sum.
struct ProblemConstants {
  double mu = 0.0;          // quasi-strong monotonicity
  double ell = 0.0;         // star-cocoercivity of F
  std::vector<double> ell_i;  // cocoercivity of each F_i
  double ell_bar = 0.0;     // mean of ell_i
  double ell_max = 0.0;     // max of ell_i
  double ell_hat = 0.0;     // averaged star-cocoercivity
};

inline Matrix symmetric_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Largest lambda with num v = lambda den v, den symmetric positive definite.
/// This is the tightest constant c with z^T num z <= c z^T den z.
inline double max_generalized_eigenvalue(const Matrix& num, const Matrix& den) {
  Eigen::LLT<Matrix> llt(den);
  if (llt.info() != Eigen::Success)
    throw NumericalError("non-positive-definite symmetric part: constants undefined");
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(num, den,
                                                       Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) throw NumericalError("generalized eigensolver failed");
  return ges.eigenvalues().maxCoeff();
}

inline double min_symmetric_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return es.eigenvalues().minCoeff();
}

/// Tightest c with (1/N) sum_k ||M_k z||^2 <= c z^T S z, where S is the
/// symmetric part of `reference`.
inline double averaged_star_cocoercivity(const std::vector<const Matrix*>& pieces,
                                         const Matrix& reference) {
  detail::require(!pieces.empty(), "averaged_star_cocoercivity: empty family");
  Matrix gram = Matrix::Zero(reference.rows(), reference.cols());
  for (const Matrix* m : pieces) gram.noalias() += m->transpose() * (*m);
  gram /= static_cast<double>(pieces.size());
  return max_generalized_eigenvalue(gram, symmetric_part(reference));
}

/// Exact constants from the affine structure (generalized symmetric
/// eigenproblems, no sampling).
inline ProblemConstants compute_constants(const FiniteSumOperator& op) {
  ProblemConstants c;
  const Matrix& abar = op.mean_matrix();
  const Matrix abar_sym = symmetric_part(abar);
  c.mu = min_symmetric_eigenvalue(abar_sym);
  if (!(c.mu > 0.0)) throw NumericalError("non-positive-definite symmetric part: constants undefined");
  c.ell = max_generalized_eigenvalue(abar.transpose() * abar, abar_sym);

  c.ell_i.reserve(op.size());
  std::vector<const Matrix*> pieces;
  pieces.reserve(op.size());
  for (const auto& comp : op.components()) {
    c.ell_i.push_back(max_generalized_eigenvalue(comp.matrix.transpose() * comp.matrix,
                                                 symmetric_part(comp.matrix)));
    pieces.push_back(&comp.matrix);
  }
  double sum = 0.0;
  for (double l : c.ell_i) sum += l;
  c.ell_bar = sum / static_cast<double>(c.ell_i.size());
  c.ell_max = *std::max_element(c.ell_i.begin(), c.ell_i.end());
  c.ell_hat = averaged_star_cocoercivity(pieces, abar);
  return c;
}

// -----------------------------------------------------------------------------
// Quadratic-game generator

enum class GeneratorMode { SpectralFlip, SymmetricPlusSkew };

inline const char* to_string(GeneratorMode m) {
  return m == GeneratorMode::SpectralFlip ? "spectral_flip" : "symmetric_plus_skew";
}

struct GameConfig {
  std::size_t n = 100;
  std::size_t d = 20;
  std::uint64_t seed = 0;
  double mu_min = 1.0;
  GeneratorMode mode = GeneratorMode::SymmetricPlusSkew;
  /// Offsets b_i ~ N(0, offset_scale / d) per coordinate.
  double offset_scale = 100.0;
  /// Scale of the PSD part S_i = sym_scale * G G^T / r.
  double sym_scale = 1.0;
  /// Scale of the skew part W_i = skew_scale * (H - H^T) / sqrt(2 r).
  double skew_scale = 1.0;
  /// Dimension r of the shared subspace carrying S_i and W_i (0 means d).
  /// With r < d the operator is mu_min * I on the complement, which gives
  /// merely monotone instances when mu_min is tiny.
  std::size_t active_dim = 0;
  /// Component 0 (matrix and offset) is multiplied by this factor.
  double outlier_scale = 1.0;
};

namespace detail {

inline Rng component_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(attempt)};
  return Rng(seq);
}

inline constexpr int kSpectralFlipRetries = 8;

// Re(Q D+ Q^{-1}) with every eigenvalue's real part pushed to >= mu_min.
inline std::optional<Matrix> spectral_flip_draw(Rng& rng, Index d, double mu_min) {
  const Matrix b = gaussian_matrix(rng, d, d);
  Eigen::EigenSolver<Matrix> es(b, true);
  if (es.info() != Eigen::Success) return std::nullopt;
  const Eigen::MatrixXcd q = es.eigenvectors();
  Eigen::VectorXcd dplus = es.eigenvalues();
  for (Index j = 0; j < d; ++j)
    dplus(j) = {std::max(std::abs(dplus(j).real()), mu_min), dplus(j).imag()};
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(q);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > 1e10) return std::nullopt;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(q);
  const Eigen::MatrixXcd a = q * dplus.asDiagonal() * lu.inverse();
  if (!a.allFinite()) return std::nullopt;
  return Matrix(a.real());
}

}  // namespace detail

/// Random strongly monotone affine game.
///
/// SymmetricPlusSkew returns A_i = S_i + mu_min I + W_i with S_i PSD and W_i
/// skew, so lambda_min(sym(A_i)) >= mu_min. SpectralFlip follows the
/// eigendecomposition recipe; it bounds eigenvalue real parts from below but
/// does not guarantee a positive definite symmetric part.
inline FiniteSumOperator generate_quadratic_game(const GameConfig& cfg) {
  detail::require(cfg.n >= 1, "generate_quadratic_game: n must be >= 1");
  detail::require(cfg.d >= 1, "generate_quadratic_game: d must be >= 1");
  detail::require(cfg.mu_min > 0.0, "generate_quadratic_game: mu_min must be positive");
  detail::require(cfg.offset_scale >= 0.0, "generate_quadratic_game: offset_scale must be >= 0");
  const Index d = static_cast<Index>(cfg.d);
  const Index r = cfg.active_dim == 0 ? d : static_cast<Index>(cfg.active_dim);
  detail::require(r >= 1 && r <= d, "generate_quadratic_game: active_dim must be in [1, d]");
  const double offset_sd = std::sqrt(cfg.offset_scale / static_cast<double>(d));

  Matrix basis;
  if (r < d) {
    Rng basis_rng = detail::component_engine(cfg.seed, ~std::uint64_t{0}, 0);
    Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(basis_rng, d, d));
    basis = qr.householderQ() * Matrix::Identity(d, r);
  }

  std::vector<AffineComponent> comps;
  comps.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    AffineComponent c;
    Rng rng = detail::component_engine(cfg.seed, i, 0);
    if (cfg.mode == GeneratorMode::SymmetricPlusSkew) {
      const Matrix g = gaussian_matrix(rng, r, r);
      const Matrix h = gaussian_matrix(rng, r, r);
      Matrix core = cfg.sym_scale * (g * g.transpose()) / static_cast<double>(r) +
                    cfg.skew_scale * (h - h.transpose()) / std::sqrt(2.0 * static_cast<double>(r));
      c.matrix = (r < d ? Matrix(basis * core * basis.transpose()) : core);
      c.matrix.diagonal().array() += cfg.mu_min;
    } else {
      std::optional<Matrix> a;
      for (int attempt = 0; attempt <= detail::kSpectralFlipRetries && !a; ++attempt) {
        if (attempt > 0) rng = detail::component_engine(cfg.seed, i, static_cast<std::uint64_t>(attempt));
        a = detail::spectral_flip_draw(rng, d, cfg.mu_min);
      }
      if (!a) throw NumericalError("generate_quadratic_game: eigendecomposition failed after retries");
      c.matrix = std::move(*a);
    }
    c.offset = gaussian_vector(rng, d, offset_sd);
    if (i == 0 && cfg.outlier_scale != 1.0) {
      c.matrix *= cfg.outlier_scale;
      c.offset *= cfg.outlier_scale;
    }
    comps.push_back(std::move(c));
  }
  return FiniteSumOperator(std::move(comps));
}

// -----------------------------------------------------------------------------
// Reference solution

/// ||x - prox_{gamma R}(x - gamma F(x))||; zero exactly at solutions.
inline double fixed_point_residual(const FiniteSumOperator& op, const Regularizer& reg,
                                   double gamma, const Vector& x) {
  return (x - reg.prox(gamma, x - gamma * op.eval_full(x))).norm();
}

struct ReferenceSolution {
  Vector x;
  double residual = 0.0;
  double gamma = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

// One semismooth-Newton (active-set) step for the L1Box fixed point: classify
// coordinates of u = x - gamma F(x), pin the inactive ones, solve the rest.
inline std::optional<Vector> active_set_candidate(const FiniteSumOperator& op,
                                                  const Regularizer& reg, double gamma,
                                                  const Vector& x) {
  const Vector u = x - gamma * op.eval_full(x);
  const double shrink = gamma * reg.weight();
  const double r = reg.box();
  const Index d = x.size();
  Vector cand = Vector::Zero(d);
  std::vector<Index> free;
  Vector sign = Vector::Zero(d);
  for (Index j = 0; j < d; ++j) {
    const double a = std::abs(u(j)) - shrink;
    const double s = u(j) >= 0 ? 1.0 : -1.0;
    if (a <= 0.0) {
      cand(j) = 0.0;
    } else if (a >= r) {
      cand(j) = s * r;
    } else {
      free.push_back(j);
      sign(j) = s;
    }
  }
  if (free.empty()) return cand;
  const Matrix& abar = op.mean_matrix();
  const Index f = static_cast<Index>(free.size());
  Matrix sub(f, f);
  Vector rhs(f);
  for (Index a = 0; a < f; ++a) {
    const Index ja = free[static_cast<std::size_t>(a)];
    double acc = -op.mean_offset()(ja) - reg.weight() * sign(ja);
    for (Index k = 0; k < d; ++k)
      if (sign(k) == 0.0) acc -= abar(ja, k) * cand(k);
    rhs(a) = acc;
    for (Index b = 0; b < f; ++b) sub(a, b) = abar(ja, free[static_cast<std::size_t>(b)]);
  }
  Eigen::FullPivLU<Matrix> lu(sub);
  if (!lu.isInvertible()) return std::nullopt;
  const Vector y = lu.solve(rhs);
  for (Index a = 0; a < f; ++a) cand(free[static_cast<std::size_t>(a)]) = y(a);
  if (!cand.allFinite()) return std::nullopt;
  return cand;
}

}  // namespace detail

/// Solution x* of the regularized VI, certified by the fixed-point residual
/// with gamma = 1/ell.
///
/// R = 0: direct linear solve of Abar x = -bbar. Otherwise deterministic
/// proximal iteration, polished by active-set Newton steps that are only
/// accepted when they lower the residual.
inline ReferenceSolution solve_reference(const FiniteSumOperator& op, const Regularizer& reg,
                                         double ell, double tol,
                                         std::size_t max_iterations = 200000) {
  detail::require(tol > 0.0, "solve_reference: tol must be positive");
  detail::require(ell > 0.0, "solve_reference: ell must be positive");
  ReferenceSolution out;
  out.gamma = 1.0 / ell;
  const Matrix& abar = op.mean_matrix();
  Eigen::FullPivLU<Matrix> lu(abar);
  const bool invertible = lu.isInvertible();

  if (reg.is_trivial()) {
    if (!invertible) throw NumericalError("solve_reference: singular mean matrix");
    Vector x = lu.solve(-op.mean_offset());
    double res = fixed_point_residual(op, reg, out.gamma, x);
    for (int refine = 0; refine < 5 && res > tol; ++refine) {
      x -= lu.solve(op.eval_full(x));
      res = fixed_point_residual(op, reg, out.gamma, x);
      ++out.iterations;
    }
    if (!(res <= tol)) throw NumericalError("solve_reference: linear solve did not reach tolerance");
    out.x = std::move(x);
    out.residual = res;
    return out;
  }

  Vector x = invertible ? Vector(reg.prox(out.gamma, lu.solve(-op.mean_offset())))
                        : Vector(Vector::Zero(op.dim()));
  double res = fixed_point_residual(op, reg, out.gamma, x);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    if (res <= tol) {
      out.x = std::move(x);
      out.residual = res;
      out.iterations = it;
      return out;
    }
    if (it % 25 == 0) {
      Vector probe = x;
      for (int newton = 0; newton < 20; ++newton) {
        auto cand = detail::active_set_candidate(op, reg, out.gamma, probe);
        if (!cand) break;
        const double cres = fixed_point_residual(op, reg, out.gamma, *cand);
        if (!(cres < res)) {
          probe = std::move(*cand);
          continue;
        }
        x = std::move(*cand);
        res = cres;
        probe = x;
        if (res <= tol) break;
      }
      if (res <= tol) continue;
    }
    x = reg.prox(out.gamma, x - out.gamma * op.eval_full(x));
    res = fixed_point_residual(op, reg, out.gamma, x);
  }
  throw NumericalError("solve_reference: iteration budget exhausted before reaching tol");
}

// -----------------------------------------------------------------------------
// Problem instance

/// A regularized VI together with its constants and reference solution.
struct ProblemInstance {
  FiniteSumOperator op;
  Regularizer reg;
  std::optional<ProblemConstants> constants;
  std::optional<Vector> x_star;
  double residual = 0.0;
  double residual_tol = 0.0;
  std::optional<GameConfig> generator;

  Index dim() const { return op.dim(); }
  std::size_t size() const { return op.size(); }

  const ProblemConstants& require_constants() const {
    if (!constants) throw MissingDataError("problem constants have not been computed");
    return *constants;
  }
  const Vector& require_solution() const {
    if (!x_star) throw MissingDataError("reference solution is not available");
    return *x_star;
  }
};

/// Computes constants and the reference solution.
inline ProblemInstance prepare_problem(FiniteSumOperator op, Regularizer reg, double tol = 1e-11,
                                       std::optional<GameConfig> generator = std::nullopt) {
  ProblemInstance p{std::move(op), reg, std::nullopt, std::nullopt, 0.0, tol, generator};
  p.constants = compute_constants(p.op);
  auto ref = solve_reference(p.op, p.reg, p.constants->ell, tol);
  p.x_star = std::move(ref.x);
  p.residual = ref.residual;
  return p;
}

}  // namespace vilab
