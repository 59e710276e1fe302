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

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vilab/distributed.hpp"
#include "vilab/verify.hpp"

namespace vilab {
namespace {

ProblemInstance toy(std::size_t n, std::size_t d, std::uint64_t seed, Regularizer reg = Regularizer::none()) {
  GameConfig cfg;
  cfg.n = n;
  cfg.d = d;
  cfg.seed = seed;
  cfg.offset_scale = 10.0;
  return prepare_problem(generate_quadratic_game(cfg), reg);
}

DistributedConfig make_config(DistributedMethod m, Quantizer q) {
  DistributedConfig c;
  c.method = m;
  c.quantizer = q;
  return c;
}

TEST(Partition, OneComponentPerWorker) {
  const auto p = toy(10, 3, 1);
  const auto shards = partition(p.op, 10);
  ASSERT_EQ(shards.size(), 10u);
  for (const auto& s : shards) {
    EXPECT_EQ(s.size(), 1u);
    EXPECT_DOUBLE_EQ(s.weight(), 1.0);
  }
}

TEST(Partition, RemainderGoesToLastWorker) {
  const auto p = toy(10, 3, 2);
  const auto shards = partition(p.op, 3);
  EXPECT_EQ(shards[0].size(), 3u);
  EXPECT_EQ(shards[1].size(), 3u);
  EXPECT_EQ(shards[2].size(), 4u);
  oracle::Gen gen(1);
  for (int t = 0; t < 20; ++t) {
    const Vector x = gen.vector(3, 5.0);
    Vector mean = Vector::Zero(3);
    for (const auto& s : shards) mean += s.eval_local(x) / 3.0;
    EXPECT_LE((mean - p.op.eval_full(x)).norm(), 1e-12 * std::max(1.0, mean.norm()));
  }
}

TEST(Partition, SingleWorkerIsTheWholeProblem) {
  const auto p = toy(7, 3, 3);
  const auto shards = partition(p.op, 1);
  const Vector x = Vector::LinSpaced(3, -1, 2);
  EXPECT_LE((shards[0].eval_local(x) - p.op.eval_full(x)).norm(), 1e-12);
  EXPECT_THROW(partition(p.op, 8), std::invalid_argument);
  EXPECT_THROW(partition(p.op, 0), std::invalid_argument);
}

TEST(Partition, PiecesAverageToWorkerOperator) {
  const auto p = toy(11, 3, 4);
  const auto shards = partition(p.op, 4);
  const Vector x = Vector::Ones(3);
  for (const auto& s : shards) {
    Vector m = Vector::Zero(3);
    for (std::size_t j = 0; j < s.size(); ++j) m += s.eval_piece(j, x);
    EXPECT_LE((m / static_cast<double>(s.size()) - s.eval_local(x)).norm(), 1e-12);
  }
}

TEST(Local, ZeroNoiseEqualsExact) {
  const auto p = toy(6, 3, 5);
  auto shards = partition(p.op, 2);
  Rng rng(0);
  const Vector x = Vector::Ones(3);
  EXPECT_EQ(local_gradient(shards[0], x, LocalMode::Noisy, rng).g, local_gradient(shards[0], x, LocalMode::Exact, rng).g);
}

TEST(Local, NoiseVarianceMatches) {
  const auto p = toy(6, 4, 6);
  auto shards = partition(p.op, 2);
  set_noise(shards, {0.7, 2.0});
  Rng rng(1);
  const Vector x = Vector::Ones(4);
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> errs;
    const Vector exact = shards[i].eval_local(x);
    for (int t = 0; t < 100000; ++t) errs.push_back((local_gradient(shards[i], x, LocalMode::Noisy, rng).g - exact).squaredNorm());
    const auto mv = oracle::mean_and_stderr(errs);
    const double s2 = shards[i].noise_sigma() * shards[i].noise_sigma();
    EXPECT_NEAR(mv.mean, s2, 3 * mv.stderr_);
  }
}

TEST(Local, LooplessAtAnchorIsExact) {
  const auto p = toy(6, 3, 7);
  const auto shards = partition(p.op, 2);
  const Vector x = Vector::LinSpaced(3, 0, 1);
  for (std::size_t j = 0; j < 3; ++j) {
    Vector w = x;
    Vector wv = shards[0].eval_local(x);
    EXPECT_LE((loopless_local_gradient(shards[0], x, w, wv, j, false).g - shards[0].eval_local(x)).norm(), 1e-12);
  }
}

TEST(Round, LosslessQsgdaIsExact) {
  const auto p = toy(6, 3, 8);
  const auto shards = partition(p.op, 3);
  auto cfg = make_config(DistributedMethod::Qsgda, Quantizer::identity());
  auto st = init_distributed(cfg, shards, Vector::Zero(3)).state;
  Rng rng(0);
  CommLedger ledger;
  const Vector x = Vector::Ones(3);
  EXPECT_LE((aggregate_round(cfg, st, shards, x, rng, ledger) - p.op.eval_full(x)).norm(), 1e-12);
  EXPECT_EQ(ledger.uplink_bits, 3u * 3u * 64u);
}

TEST(Round, DianaShiftsAtOperatorAreStationary) {
  const auto p = toy(6, 4, 9);
  const auto shards = partition(p.op, 2);
  auto cfg = make_config(DistributedMethod::Diana, Quantizer::rand_k(2));
  auto st = init_distributed(cfg, shards, Vector::Zero(4)).state;
  const Vector x = Vector::LinSpaced(4, -1, 1);
  st.h = Vector::Zero(4);
  for (std::size_t i = 0; i < 2; ++i) {
    st.h_i[i] = shards[i].eval_local(x);
    st.h += st.h_i[i] / 2.0;
  }
  const auto before = st;
  Rng rng(2);
  CommLedger ledger;
  for (int t = 0; t < 10; ++t) {
    const Vector g = aggregate_round(cfg, st, shards, x, rng, ledger);
    EXPECT_LE((g - p.op.eval_full(x)).norm(), 1e-12);
  }
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE((st.h_i[i] - before.h_i[i]).norm(), 1e-12);
}

TEST(Round, QsgdaRandKEnumerationIsUnbiased) {
  const auto p = toy(4, 3, 10);
  const auto shards = partition(p.op, 2);
  auto cfg = make_config(DistributedMethod::Qsgda, Quantizer::rand_k(1));
  resolve_parameters(cfg, shards);
  const auto st = init_distributed(cfg, shards, Vector::Zero(3)).state;
  const Vector x = Vector::LinSpaced(3, 1, 2);
  const auto outs = enumerate_round(cfg, st, shards, x);
  ASSERT_EQ(outs.size(), 9u);
  Vector m = Vector::Zero(3);
  for (const auto& o : outs) m += o.probability * o.g;
  EXPECT_LE((m - p.op.eval_full(x)).norm(), 1e-12);
}

TEST(Round, EveryMethodUnbiasedByEnumeration) {
  oracle::Gen gen(3);
  for (int t = 0; t < 10; ++t) {
    const auto p = toy(gen.index(2, 6), gen.index(2, 3), gen.index(0, 999));
    const auto shards = partition(p.op, 2);
    const DistributedReference ref = DistributedReference::build(shards, p.require_solution());
    for (auto m : {DistributedMethod::Qsgda, DistributedMethod::Diana, DistributedMethod::VrDiana}) {
      auto cfg = make_config(m, Quantizer::rand_k(1));
      resolve_parameters(cfg, shards);
      Rng rng(t);
      const auto st = random_distributed_state(cfg, shards, ref, 1.0, rng);
      const Vector x = gen.vector(p.dim());
      EXPECT_TRUE(check_unbiasedness(cfg, st, shards, p.op, x).passed) << to_string(m);
    }
  }
}

TEST(Round, NoisyRoundsUnbiasedInMonteCarlo) {
  const auto p = toy(6, 3, 11);
  auto shards = partition(p.op, 3);
  set_noise(shards, {1.0});
  for (auto m : {DistributedMethod::Qsgda, DistributedMethod::Diana}) {
    auto cfg = make_config(m, Quantizer::rand_k(1));
    auto st = init_distributed(cfg, shards, Vector::Zero(3)).state;
    CheckOptions opt;
    opt.mode = CheckMode::MonteCarlo;
    opt.samples = 100000;
    EXPECT_TRUE(check_unbiasedness(cfg, st, shards, p.op, Vector::Ones(3), opt).passed);
  }
}

TEST(Round, ServerShiftTracksWorkerShifts) {
  const auto p = toy(8, 4, 12);
  const auto shards = partition(p.op, 4);
  oracle::Gen gen(4);
  for (auto m : {DistributedMethod::Diana, DistributedMethod::VrDiana}) {
    auto cfg = make_config(m, Quantizer::rand_k(2));
    auto st = init_distributed(cfg, shards, Vector::Zero(4)).state;
    Rng rng(5);
    CommLedger ledger;
    for (int t = 0; t < 500; ++t) {
      aggregate_round(cfg, st, shards, gen.vector(4, 3.0), rng, ledger);
      Vector mean = Vector::Zero(4);
      for (const auto& h : st.h_i) mean += h / 4.0;
      ASSERT_LE((mean - st.h).norm(), 1e-12 * std::max(1.0, mean.norm()));
    }
  }
}

TEST(Round, SparseBitsPerRound) {
  const auto p = toy(10, 100, 13);
  const auto shards = partition(p.op, 5);
  auto cfg = make_config(DistributedMethod::Qsgda, Quantizer::rand_k(5));
  auto st = init_distributed(cfg, shards, Vector::Zero(100)).state;
  Rng rng(0);
  CommLedger ledger;
  for (int t = 0; t < 3; ++t) aggregate_round(cfg, st, shards, Vector::Ones(100), rng, ledger);
  EXPECT_EQ(ledger.uplink_bits, 3u * 5u * 5u * (64u + 7u));
  EXPECT_EQ(ledger.rounds, 3u);
  EXPECT_EQ(ledger.oracle_calls, 3u * 10u);
}

TEST(Round, SamplerMatchesEnumeration) {
  const auto p = toy(4, 3, 14);
  const auto shards = partition(p.op, 2);
  auto cfg = make_config(DistributedMethod::VrDiana, Quantizer::rand_k(2));
  resolve_parameters(cfg, shards);
  const DistributedReference ref = DistributedReference::build(shards, p.require_solution());
  Rng rng(6);
  const auto st = random_distributed_state(cfg, shards, ref, 1.0, rng);
  const Vector x = Vector::Ones(3);
  Vector want = Vector::Zero(3);
  for (const auto& o : enumerate_round(cfg, st, shards, x)) want += o.probability * o.g;
  std::vector<std::vector<double>> coords(3);
  CommLedger ledger;
  for (int t = 0; t < 50000; ++t) {
    auto copy = st;
    const Vector g = aggregate_round(cfg, copy, shards, x, rng, ledger);
    for (Index j = 0; j < 3; ++j) coords[j].push_back(g(j));
  }
  for (Index j = 0; j < 3; ++j) {
    const auto mv = oracle::mean_and_stderr(coords[j]);
    EXPECT_NEAR(mv.mean, want(j), 4 * mv.stderr_);
  }
}

TEST(Config, RejectsInvalidCombinations) {
  const auto p = toy(6, 3, 15);
  auto shards = partition(p.op, 2);
  auto cfg = make_config(DistributedMethod::Diana, Quantizer::rand_k(1));
  cfg.alpha = 0.5;
  EXPECT_THROW(resolve_parameters(cfg, shards), std::invalid_argument);
  cfg = make_config(DistributedMethod::VrDiana, Quantizer::identity());
  cfg.p = 0.3;
  cfg.alpha = 0.2;
  EXPECT_THROW(resolve_parameters(cfg, shards), std::invalid_argument);
  set_noise(shards, {0.1});
  EXPECT_THROW(local_mode(DistributedMethod::VrDiana, shards), ConfigError);
  EXPECT_THROW(set_noise(shards, {0.1, 0.2, 0.3}), std::invalid_argument);
}

TEST(Config, Defaults) {
  const auto p = toy(12, 6, 16);
  const auto shards = partition(p.op, 3);
  auto diana = make_config(DistributedMethod::Diana, Quantizer::rand_k(2));
  resolve_parameters(diana, shards);
  EXPECT_DOUBLE_EQ(diana.alpha, 1.0 / 3.0);
  auto vr = make_config(DistributedMethod::VrDiana, Quantizer::rand_k(2));
  resolve_parameters(vr, shards);
  EXPECT_DOUBLE_EQ(vr.p, 0.25);
  EXPECT_DOUBLE_EQ(vr.alpha, 0.25 / 3.0);
}

TEST(Heterogeneity, HomogeneousShardsGiveZero) {
  oracle::Gen gen(5);
  const AffineComponent c{gen.monotone_matrix(3, 1.0), gen.vector(3)};
  const auto p = prepare_problem(FiniteSumOperator({c, c, c, c}), Regularizer::none());
  EXPECT_NEAR(zeta_star_sq(partition(p.op, 2), p.require_solution()), 0.0, 1e-20);
  const auto q = toy(5, 3, 17);
  EXPECT_NEAR(zeta_star_sq(partition(q.op, 1), q.require_solution()), 0.0, 1e-20);
}

TEST(Heterogeneity, HandSummation) {
  const auto p = toy(4, 2, 18);
  const Vector& xs = p.require_solution();
  const auto& cs = p.op.components();
  const Vector f1 = (cs[0].eval(xs) + cs[1].eval(xs)) / 2.0;
  const Vector f2 = (cs[2].eval(xs) + cs[3].eval(xs)) / 2.0;
  const double want = (f1.squaredNorm() + f2.squaredNorm()) / 2.0;
  EXPECT_GT(want, 0.0);
  EXPECT_NEAR(zeta_star_sq(partition(p.op, 2), xs), want, 1e-12 * want);
}

TEST(Theory, CompressedSextuples) {
  const auto p = toy(8, 5, 19);
  auto shards = partition(p.op, 4);
  set_noise(shards, {0.5});
  const auto dc = distributed_constants(p, shards);
  const double om = 4.0;
  const double s2 = 0.25;
  const double z2 = zeta_star_sq(shards, p.require_solution());
  auto q = distributed_theory_params(make_config(DistributedMethod::Qsgda, Quantizer::rand_k(1)), p, shards);
  EXPECT_NEAR(q.A, 1.5 * dc.ell + 4.5 * om * dc.ell_hat / 4.0, 1e-12);
  EXPECT_NEAR(q.D1, (3 * (1 + 3 * om) * s2 + 9 * om * z2) / 4.0, 1e-12 * q.D1);
  auto cfg = make_config(DistributedMethod::Diana, Quantizer::rand_k(1));
  resolve_parameters(cfg, shards);
  const auto d = distributed_theory_params(cfg, p, shards);
  EXPECT_DOUBLE_EQ(d.B, 2 * om / 4.0);
  EXPECT_DOUBLE_EQ(d.D1, (1 + om) * s2 / 4.0);
  EXPECT_DOUBLE_EQ(d.rho, cfg.alpha);
  EXPECT_DOUBLE_EQ(d.D2, cfg.alpha * s2);
}

TEST(Theory, LosslessHomogeneousQsgdaIsNoiseless) {
  oracle::Gen gen(6);
  const AffineComponent c{gen.monotone_matrix(3, 1.0), gen.vector(3)};
  const auto p = prepare_problem(FiniteSumOperator({c, c, c, c}), Regularizer::none());
  const auto tp = distributed_theory_params(make_config(DistributedMethod::Qsgda, Quantizer::identity()), p,
                                            partition(p.op, 2));
  EXPECT_NEAR(tp.D1, 0.0, 1e-20);
}

TEST(KeyAssumption, HoldsForCompressedMethods) {
  for (auto reg : {Regularizer::none(), Regularizer::l1_box(0.2, 0.5)}) {
    const auto p = toy(4, 3, 20, reg);
    const auto shards = partition(p.op, 2);
    for (auto m : {DistributedMethod::Qsgda, DistributedMethod::Diana, DistributedMethod::VrDiana}) {
      auto cfg = make_config(m, Quantizer::rand_k(1));
      resolve_parameters(cfg, shards);
      KeyAssumptionOptions opt;
      opt.points = 200;
      const auto rep = check_key_assumption(cfg, shards, p, distributed_theory_params(cfg, p, shards), opt);
      EXPECT_TRUE(rep.passed) << rep.name << " worst " << rep.worst_violation;
    }
  }
}

TEST(KeyAssumption, HoldsWithNoiseInMonteCarlo) {
  const auto p = toy(4, 3, 21);
  auto shards = partition(p.op, 2);
  set_noise(shards, {0.8, 0.3});
  for (auto m : {DistributedMethod::Qsgda, DistributedMethod::Diana}) {
    auto cfg = make_config(m, Quantizer::rand_k(1));
    resolve_parameters(cfg, shards);
    KeyAssumptionOptions opt;
    opt.points = 20;
    opt.mode = CheckMode::MonteCarlo;
    opt.samples = 20000;
    const auto rep = check_key_assumption(cfg, shards, p, distributed_theory_params(cfg, p, shards), opt);
    EXPECT_TRUE(rep.passed) << rep.name << " worst " << rep.worst_violation;
  }
}

}  // namespace
}  // namespace vilab
