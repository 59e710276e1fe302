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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vilab/vilab.hpp"

namespace {

using namespace vilab;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double last_quartile_rel(const RunTrace& t) {
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = t.rows.size() * 3 / 4; i < t.rows.size(); ++i, ++cnt) acc += t.rows[i].dist_sq;
  return acc / static_cast<double>(cnt) / t.rows.front().dist_sq;
}

ProblemInstance toy(std::size_t n, std::size_t d, std::uint64_t seed, const Regularizer& reg) {
  GameConfig cfg;
  cfg.n = n;
  cfg.d = d;
  cfg.seed = seed;
  return prepare_problem(generate_quadratic_game(cfg), reg);
}

std::vector<EstimatorKind> estimator_kinds(const ProblemInstance& p) {
  const double n = static_cast<double>(p.size());
  return {FullBatch{},
          SgdaAS{SamplingScheme::uniform(1)},
          SgdaAS{SamplingScheme::uniform(2)},
          SgdaAS{SamplingScheme::importance(p.require_constants().ell_i, 1)},
          SgdaAS{SamplingScheme::without_replacement(2)},
          LSvrgda{1.0 / n},
          SagaSgda{},
          Csgda{},
          SegaSgda{}};
}

DistributedConfig resolved(DistributedMethod m, const Quantizer& q, const std::vector<WorkerShard>& shards) {
  DistributedConfig c;
  c.method = m;
  c.quantizer = q;
  resolve_parameters(c, shards);
  return c;
}

Outcome prox_correctness() {
  oracle::Gen gen(2024);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double lambda = gen.uniform(0.0, 2.0);
    const double r = t % 5 == 0 ? kInfinity : gen.uniform(0.05, 5.0);
    const double gamma = gen.uniform(1e-3, 3.0);
    const Vector x = gen.vector(4, 4.0);
    const Vector y = Regularizer::l1_box(lambda, r).prox(gamma, x);
    for (Index j = 0; j < 4; ++j) worst = std::max(worst, std::abs(y(j) - oracle::prox_1d(x(j), gamma, lambda, r)));
  }
  return {worst <= 1e-10, "1000 cases, max |prox - oracle| = " + fmt(worst)};
}

Outcome exact_unbiasedness() {
  oracle::Gen gen(7);
  double worst = 0.0;
  std::size_t checks = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = gen.index(2, 6);
    const std::size_t d = gen.index(2, 4);
    const auto reg = t % 2 ? Regularizer::l1_box(0.1, 2.0) : Regularizer::none();
    const auto p = toy(n, d, 100 + t, reg);
    const ReferenceCache ref = ReferenceCache::build(p);
    const Vector x = p.require_solution() + gen.vector(static_cast<Index>(d), 2.0);
    Rng rng(t);
    for (const auto& kind : estimator_kinds(p)) {
      const auto st = random_state(kind, p.op, ref, 1.0, rng);
      const auto rep = check_unbiasedness(kind, st, p.op, x);
      worst = std::max(worst, rep.worst_violation);
      ++checks;
    }
    const auto shards = partition(p.op, 2);
    const DistributedReference dref = DistributedReference::build(shards, p.require_solution());
    for (auto m : {DistributedMethod::Qsgda, DistributedMethod::Diana, DistributedMethod::VrDiana}) {
      const auto cfg = resolved(m, Quantizer::rand_k(1 + t % 2), shards);
      const auto st = random_distributed_state(cfg, shards, dref, 1.0, rng);
      worst = std::max(worst, check_unbiasedness(cfg, st, shards, p.op, x).worst_violation);
      ++checks;
    }
  }
  return {worst <= 1e-12, std::to_string(checks) + " enumerations, max ||E g - F(x)|| = " + fmt(worst)};
}

Outcome quantizer_moments() {
  double worst = 0.0;
  for (Index d = 1; d <= 8; ++d)
    for (Index k = 1; k <= d; ++k)
      worst = std::max(worst, check_quantizer(Quantizer::rand_k(k), d, CheckMode::Exact, 20, d * 10 + k).worst_violation);
  return {worst <= 1e-12, "RandK d <= 8, all k, worst moment error = " + fmt(worst)};
}

Outcome key_assumption() {
  double worst = -kInfinity;
  std::string worst_name;
  std::size_t checks = 0;
  KeyAssumptionOptions opt;
  opt.points = 1000;
  opt.tolerance = 1e-8;
  for (const auto& reg : {Regularizer::none(), Regularizer::l1_box(0.2, 1.5)}) {
    const auto p = toy(6, 4, reg.is_trivial() ? 31 : 32, reg);
    for (const auto& kind : estimator_kinds(p)) {
      const auto rep = check_key_assumption(kind, p, theory_params(kind, p), opt);
      ++checks;
      if (rep.worst_violation > worst) {
        worst = rep.worst_violation;
        worst_name = rep.name;
      }
    }
    const auto dp = toy(4, 3, reg.is_trivial() ? 33 : 34, reg);
    const auto shards = partition(dp.op, 2);
    for (auto m : {DistributedMethod::Qsgda, DistributedMethod::Diana, DistributedMethod::VrDiana}) {
      const auto cfg = resolved(m, Quantizer::rand_k(1), shards);
      const auto rep = check_key_assumption(cfg, shards, dp, distributed_theory_params(cfg, dp, shards), opt);
      ++checks;
      if (rep.worst_violation > worst) {
        worst = rep.worst_violation;
        worst_name = rep.name;
      }
    }
  }
  return {worst <= 1e-8, std::to_string(checks) + " estimator/regularizer pairs x 1000 points, worst margin = " +
                             fmt(-worst) + " (" + worst_name + ")"};
}

Outcome envelope() {
  GameConfig g;
  g.n = 20;
  g.d = 10;
  g.seed = 5;
  g.offset_scale = 10.0;
  const auto p = prepare_problem(generate_quadratic_game(g), Regularizer::l1_box(0.1, 5.0));
  const double mu = p.require_constants().mu;
  Rng r0(1);
  const Vector x0 = p.require_solution() + gaussian_vector(r0, 10, 3.0);
  // Squared distances cannot resolve below the rounding error of x*.
  const double floor = std::pow(64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, p.require_solution().norm()), 2);
  double worst = 0.0;
  std::string where;
  for (const EstimatorKind& kind : {EstimatorKind{FullBatch{}}, EstimatorKind{LSvrgda{1.0 / 20}}}) {
    const auto tp = theory_params(kind, p);
    const double gamma = theory_stepsize(tp, mu);
    RunOptions opt;
    opt.iterations = 3000;
    opt.record_every = 10;
    std::vector<double> mean_v;
    for (std::uint64_t s = 0; s < 100; ++s) {
      opt.seed = s;
      const auto t = run(p, kind, ConstantStep{gamma}, x0, opt);
      if (mean_v.empty()) mean_v.assign(t.rows.size(), 0.0);
      for (std::size_t i = 0; i < t.rows.size(); ++i) mean_v[i] += t.rows[i].lyapunov / 100.0;
      if (s + 1 == 100) {
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          const double env = theoretical_envelope(tp, mu, gamma, mean_v[0], t.rows[i].k);
          const double ratio = mean_v[i] / std::max(env, floor);
          if (ratio > worst) {
            worst = ratio;
            where = estimator_name(kind) + " k=" + std::to_string(t.rows[i].k);
          }
        }
      }
    }
  }
  return {worst <= 1.1, "max mean V_k / max(envelope, " + fmt(floor) + ") = " + fmt(worst) + " at " + where};
}

Outcome variance_reduction() {
  GameConfig g;
  g.n = 50;
  g.d = 20;
  g.seed = 3;
  g.offset_scale = 100.0;
  bool pass = true;
  std::ostringstream os;
  for (const auto& reg : {Regularizer::none(), Regularizer::l1_box(0.1, 10.0)}) {
    const auto p = prepare_problem(generate_quadratic_game(g), reg);
    const double mu = p.require_constants().mu;
    DistributedSpec vr;
    vr.config.method = DistributedMethod::VrDiana;
    vr.n_workers = 5;
    const std::vector<MethodSpec> vr_methods{EstimatorKind{LSvrgda{1.0 / 50}}, EstimatorKind{SagaSgda{}},
                                             EstimatorKind{SegaSgda{}}, vr};
    RunOptions opt;
    opt.iterations = 1000000;
    opt.max_oracle_calls = 10000;
    opt.record_every = 50;
    opt.track_sigma = false;
    os << (reg.is_trivial() ? "R=none:" : " R=l1box:");
    for (const auto& m : vr_methods) {
      double worst = 0.0;
      for (std::uint64_t s = 0; s < 3; ++s) {
        opt.seed = s;
        const auto t = run(p, m, ConstantStep{theory_stepsize(method_theory(m, p), mu)}, Vector::Zero(20), opt);
        worst = std::max(worst, t.rows.back().dist_sq / t.rows.front().dist_sq);
      }
      pass = pass && worst <= 1e-8;
      os << ' ' << method_name(m) << '=' << fmt(worst);
    }
    const MethodSpec sgda = EstimatorKind{SgdaAS{SamplingScheme::uniform(1)}};
    double best = kInfinity;
    for (std::uint64_t s = 0; s < 3; ++s) {
      opt.seed = s;
      const auto t = run(p, sgda, ConstantStep{theory_stepsize(method_theory(sgda, p), mu)}, Vector::Zero(20), opt);
      best = std::min(best, last_quartile_rel(t));
    }
    pass = pass && best > 1e-4;
    os << " sgda_as plateau=" << fmt(best);
  }
  return {pass, os.str()};
}

Outcome uniform_vs_importance() {
  ExperimentOptions eo;
  eo.write_files = false;
  eo.keep_traces = true;
  const auto cfg = builtin_recipe("us_vs_is");
  const auto s = run_experiment(cfg, eo);
  const std::size_t ns = cfg.seeds.size();
  std::vector<double> plateau[2];
  std::vector<std::vector<double>> curves[2];
  for (std::size_t i = 0; i < s.traces.size(); ++i) {
    const std::size_t m = i / ns;
    plateau[m].push_back(last_quartile_rel(s.traces[i]));
    std::vector<double> c;
    for (const auto& r : s.traces[i].rows) c.push_back(r.dist_sq / s.traces[i].rows.front().dist_sq);
    curves[m].push_back(std::move(c));
  }
  const double pu = median(plateau[0]);
  const double pi = median(plateau[1]);
  // Linear phase: the first tenth of the budget, where both schedules hold 1/h.
  double rate[2];
  for (int m = 0; m < 2; ++m) {
    std::vector<double> ks, vs;
    for (std::size_t j = 0; j < curves[m][0].size(); ++j) {
      const std::size_t k = s.traces[m * ns].rows[j].k;
      if (k > cfg.iterations / 10) break;
      std::vector<double> col;
      for (const auto& c : curves[m]) col.push_back(c[j]);
      ks.push_back(static_cast<double>(k));
      vs.push_back(median(col));
    }
    rate[m] = fit_linear_rate(ks, vs).rate;
  }
  const double ratio = pu / pi;
  return {ratio >= 5.0 && rate[1] < rate[0],
          "plateau US/IS = " + fmt(ratio) + " (US " + fmt(pu) + ", IS " + fmt(pi) + "), linear-phase rate US " +
              fmt(rate[0]) + " vs IS " + fmt(rate[1])};
}

Outcome compressed_full_batch() {
  GameConfig g;
  g.n = 100;
  g.d = 100;
  g.seed = 11;
  g.offset_scale = 100.0;
  const auto p = prepare_problem(generate_quadratic_game(g), Regularizer::none());
  const double mu = p.require_constants().mu;
  const double zeta = zeta_star_sq(partition(p.op, 10), p.require_solution());
  RunOptions opt;
  opt.iterations = 4000;
  opt.record_every = 20;
  opt.track_sigma = false;
  double rel[3];
  double bits_per_round = 0.0;
  const DistributedMethod ms[3] = {DistributedMethod::Diana, DistributedMethod::Qsgda, DistributedMethod::VrDiana};
  for (int i = 0; i < 3; ++i) {
    DistributedSpec ds;
    ds.config.method = ms[i];
    ds.config.quantizer = Quantizer::rand_k(5);
    ds.n_workers = 10;
    const auto t = run(p, ds, ConstantStep{theory_stepsize(method_theory(ds, p), mu)}, Vector::Zero(100), opt);
    rel[i] = ms[i] == DistributedMethod::Qsgda ? last_quartile_rel(t) : t.rows.back().dist_sq / t.rows.front().dist_sq;
    if (ms[i] == DistributedMethod::VrDiana)
      bits_per_round = static_cast<double>(t.rows.back().uplink_bits) / static_cast<double>(t.rows.back().k);
  }
  const double dense = 10.0 * 100.0 * 64.0;
  const bool pass = zeta > 0.0 && rel[0] <= 1e-8 && rel[1] > 1e-4 && rel[2] <= 1e-8 && bits_per_round <= 0.1 * dense;
  return {pass, "zeta*^2 = " + fmt(zeta) + ", diana " + fmt(rel[0]) + ", qsgda plateau " + fmt(rel[1]) +
                    ", vr_diana " + fmt(rel[2]) + ", vr_diana bits/round " + fmt(bits_per_round) + " of " +
                    fmt(dense)};
}

Outcome gap_metric() {
  double at_solution = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    GameConfig g;
    g.n = 20;
    g.d = 10;
    g.seed = seed;
    g.mu_min = 1e-6;
    const auto p = prepare_problem(generate_quadratic_game(g), Regularizer::l1_box(0.1, 5.0));
    const auto box = BoxSet::around_solution(p.require_solution(), Vector::Constant(10, 3.0));
    at_solution = std::max(at_solution, restricted_gap(p, box, p.require_solution()).value);
  }

  GameConfig g;
  g.n = 50;
  g.d = 20;
  g.seed = 1;
  g.mu_min = 1e-6;
  g.active_dim = 10;
  g.offset_scale = 1.0;
  g.skew_scale = 0.0;
  const auto p = prepare_problem(generate_quadratic_game(g), Regularizer::l1_box(0.1, 5.0));
  Rng r0(5);
  const Vector x0 = gaussian_vector(r0, 20, 5.0);
  const auto box = BoxSet::around_solution(p.require_solution(), x0);
  const MethodSpec m = EstimatorKind{SgdaAS{SamplingScheme::uniform(1)}};
  const double gamma = 1.0 / (4.0 * method_theory(m, p).A + p.require_constants().ell);
  double early = 0.0, late = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    RunOptions opt;
    opt.record_every = 1000000;
    opt.track_sigma = false;
    opt.seed = s;
    opt.iterations = 100;
    early += restricted_gap(p, box, run(p, m, ConstantStep{gamma}, x0, opt).average_x).value / 5.0;
    opt.iterations = 10000;
    late += restricted_gap(p, box, run(p, m, ConstantStep{gamma}, x0, opt).average_x).value / 5.0;
  }
  const double mu = p.require_constants().mu;
  return {at_solution <= 1e-8 && early >= 10.0 * late,
          "gap(x*) = " + fmt(at_solution) + "; mu = " + fmt(mu) + ", averaged gap k=100 " + fmt(early) +
              " -> k=1e4 " + fmt(late) + " (x" + fmt(early / late) + ")"};
}

Outcome reductions() {
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& reg : {Regularizer::none(), Regularizer::l1_box(0.2, 3.0)}) {
      GameConfig g;
      g.n = 12;
      g.d = 6;
      g.seed = seed;
      g.offset_scale = 10.0;
      const auto p = prepare_problem(generate_quadratic_game(g), reg);
      const double gamma = 0.5 / p.require_constants().ell_max;
      RunOptions opt;
      opt.iterations = 1000;
      opt.seed = seed;
      Rng r0(seed);
      const Vector x0 = gaussian_vector(r0, 6, 5.0);
      DistributedSpec diana;
      diana.config.method = DistributedMethod::Diana;
      diana.config.quantizer = Quantizer::identity();
      diana.n_workers = 4;
      DistributedSpec vr;
      vr.config.method = DistributedMethod::VrDiana;
      vr.config.quantizer = Quantizer::identity();
      vr.n_workers = 1;
      const std::pair<MethodSpec, MethodSpec> pairs[] = {{EstimatorKind{FullBatch{}}, diana},
                                                         {EstimatorKind{LSvrgda{1.0 / 12}}, vr}};
      for (const auto& [ref, dist] : pairs) {
        const auto a = run(p, ref, ConstantStep{gamma}, x0, opt);
        const auto b = run(p, dist, ConstantStep{gamma}, x0, opt);
        if (a.rows.size() != b.rows.size()) return {false, "trace lengths differ"};
        for (std::size_t i = 0; i < a.rows.size(); ++i)
          worst = std::max(worst, std::abs(a.rows[i].dist_sq - b.rows[i].dist_sq) /
                                      std::max(1.0, a.rows[i].dist_sq));
        worst = std::max(worst, (a.final_x - b.final_x).norm());
      }
    }
  }
  return {worst <= 1e-12, "diana(identity) vs full_batch, vr_diana(identity, 1 worker) vs lsvrgda: max deviation " +
                              fmt(worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1  prox correctness", prox_correctness},
      {"2  exact unbiasedness", exact_unbiasedness},
      {"3  quantizer moments", quantizer_moments},
      {"4  key assumption certification", key_assumption},
      {"5  Lyapunov envelope", envelope},
      {"6  variance reduction", variance_reduction},
      {"7  uniform vs importance sampling", uniform_vs_importance},
      {"8  QSGDA vs DIANA full batch", compressed_full_batch},
      {"9  restricted gap", gap_metric},
      {"10 reduction identities", reductions},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
