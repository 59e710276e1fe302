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

// vilab: command-line front end for generating problems, running
// experiments and checking assumptions.
//
// Exit codes: 0 success, 1 configuration error, 2 check failure,
// 3 one or more runs diverged.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vilab/vilab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitCheck = 2;
constexpr int kExitDiverged = 3;

struct SweepFlags {
  std::string out;
  std::string seeds;
  std::size_t threads = 1;
  std::size_t record_every = 0;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f) {
  cmd->add_option("--out", f.out, "Output directory (overrides the config)");
  cmd->add_option("--seeds", f.seeds, "Comma-separated seed list, or a count N for seeds 0..N-1");
  cmd->add_option("--threads", f.threads, "Worker threads for (method, seed) cells")->check(CLI::PositiveNumber);
  cmd->add_option("--record-every", f.record_every, "Record every s-th iterate")->check(CLI::PositiveNumber);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  if (text.find(',') == std::string::npos) {
    const auto count = std::stoull(text);
    for (std::uint64_t s = 0; s < count; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) seeds.push_back(std::stoull(tok));
  return seeds;
}

void apply_sweep_flags(vilab::ExperimentConfig& cfg, const SweepFlags& f) {
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.seeds.empty()) {
    try {
      cfg.seeds = parse_seeds(f.seeds);
    } catch (const std::exception&) {
      throw vilab::ConfigError("malformed --seeds '" + f.seeds + "'");
    }
    if (cfg.seeds.empty()) throw vilab::ConfigError("--seeds selects no seeds");
    cfg.source["seeds"] = cfg.seeds;
  }
  if (f.record_every > 0) {
    cfg.metrics.record_every = f.record_every;
    cfg.source["metrics"]["record_every"] = f.record_every;
  }
}

int report_summary(const vilab::ExperimentSummary& s) {
  std::size_t diverged = 0;
  for (const auto& r : s.runs) {
    std::cout << r.method << " seed=" << r.seed << " calls=" << r.oracle_calls
              << " rel_dist_sq=" << vilab::to_decimal(r.final_relative_dist_sq);
    if (r.diverged) {
      std::cout << " DIVERGED at k=" << r.divergence_iteration;
      ++diverged;
    }
    std::cout << '\n';
  }
  std::cout << "wrote " << s.runs.size() << " traces to " << s.directory << '\n';
  return diverged > 0 ? kExitDiverged : kExitOk;
}

// Exact checks where the outcome space is enumerable, Monte-Carlo otherwise.
template <class Fn>
vilab::CheckReport exact_or_mc(Fn&& fn) {
  try {
    return fn(vilab::CheckMode::Exact);
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.find("too large") == std::string::npos && what.find("enumerat") == std::string::npos) throw;
    return fn(vilab::CheckMode::MonteCarlo);
  }
}

vilab::json report_json(const vilab::CheckReport& r) {
  vilab::json j{{"check", r.name},
                {"mode", vilab::to_string(r.mode)},
                {"trials", r.trials},
                {"worst_violation", r.worst_violation},
                {"tolerance", r.tolerance},
                {"passed", r.passed}};
  for (const auto& [k, v] : r.details) j["details"][k] = v;
  return j;
}

int cmd_verify(const std::string& config_path, std::size_t points, std::uint64_t seed) {
  using namespace vilab;
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const ProblemInstance problem = prepare_experiment_problem(cfg);
  std::vector<CheckReport> reports;
  reports.push_back(check_operator_conditions(problem, points, seed));

  Rng rng(seed);
  const Vector x = problem.require_solution() + gaussian_vector(rng, problem.dim());
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const MethodSpec spec = resolve_method(cfg.methods[i].body, problem, "methods[" + std::to_string(i) + "]");
    const TheoryParams tp = method_theory(spec, problem);
    KeyAssumptionOptions ko;
    ko.points = points;
    ko.seed = seed;
    ko.samples = 2000;
    ko.radius = std::max(1.0, problem.require_solution().norm());
    if (const auto* e = std::get_if<EstimatorKind>(&spec)) {
      const auto state = init_estimator(*e, problem.op, problem.require_solution()).state;
      reports.push_back(exact_or_mc([&](CheckMode m) {
        CheckOptions o;
        o.mode = m;
        o.seed = seed;
        return check_unbiasedness(*e, state, problem.op, x, o);
      }));
      reports.push_back(exact_or_mc([&](CheckMode m) {
        ko.mode = m;
        return check_key_assumption(*e, problem, tp, ko);
      }));
    } else {
      const auto& ds = std::get<DistributedSpec>(spec);
      auto shards = partition(problem.op, ds.n_workers);
      set_noise(shards, ds.noise_sigma);
      DistributedConfig dc = ds.config;
      const auto state = init_distributed(dc, shards, problem.require_solution()).state;
      reports.push_back(exact_or_mc([&](CheckMode m) {
        CheckOptions o;
        o.mode = m;
        o.seed = seed;
        o.samples = 20000;
        return check_unbiasedness(dc, state, shards, problem.op, x, o);
      }));
      reports.push_back(exact_or_mc([&](CheckMode m) {
        ko.mode = m;
        return check_key_assumption(dc, shards, problem, tp, ko);
      }));
      if (dc.quantizer.kind == QuantizerKind::RandK)
        reports.push_back(exact_or_mc([&](CheckMode m) {
          return check_quantizer(dc.quantizer, problem.dim(), m, 20, seed, 20000);
        }));
    }
  }
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << report_json(r).dump() << '\n';
    ok = ok && r.passed;
  }
  std::cout << (ok ? "all checks passed" : "some checks FAILED") << '\n';
  return ok ? kExitOk : kExitCheck;
}

int cmd_gap(const std::string& problem_path, const std::string& point_path, double radius, double tol) {
  using namespace vilab;
  ProblemInstance problem = load_problem(problem_path);
  if (!problem.x_star) {
    if (!problem.constants) throw ConfigError("problem constants are undefined; cannot solve for x*");
    auto ref = solve_reference(problem.op, problem.reg, problem.constants->ell, 1e-11);
    problem.x_star = std::move(ref.x);
    problem.residual = ref.residual;
  }
  const json pj = read_json_file(point_path);
  const Vector z = vector_from_json(pj.is_object() ? detail::require_key(pj, "x", "") : pj, "x");
  if (z.size() != problem.dim()) throw ConfigError("point has the wrong dimension");
  const BoxSet box = radius > 0.0 ? BoxSet(*problem.x_star, radius)
                                  : BoxSet::around_solution(*problem.x_star, z);
  const GapResult g = restricted_gap(problem, box, z, tol);
  std::cout << json{{"gap", g.value}, {"approximate", g.approximate}, {"radius", box.radius},
                    {"iterations", g.iterations}}
                   .dump()
            << '\n';
  return kExitOk;
}

int cmd_gen(const std::string& config_path, const std::string& out, const vilab::GameConfig& flags,
            double lambda, double radius) {
  using namespace vilab;
  GameConfig g = flags;
  Regularizer reg = Regularizer::none();
  if (!config_path.empty()) {
    const json j = read_json_file(config_path);
    const json& pj = j.contains("problem") ? j["problem"] : j;
    g = game_config_from_json(pj.contains("generator") ? pj["generator"] : pj, "generator");
    if (pj.contains("regularizer")) reg = regularizer_from_json(pj["regularizer"], "regularizer");
  }
  if (lambda > 0.0 || std::isfinite(radius)) reg = Regularizer::l1_box(lambda, radius);
  ProblemInstance p = prepare_problem(generate_quadratic_game(g), reg, 1e-11, g);
  save_problem(p, out);
  const auto& c = p.require_constants();
  std::cout << json{{"file", out}, {"mu", c.mu}, {"ell", c.ell}, {"ell_bar", c.ell_bar},
                    {"ell_max", c.ell_max}, {"ell_hat", c.ell_hat}, {"residual", p.residual}}
                   .dump()
            << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vilab: stochastic methods for regularized variational inequalities"};
  app.require_subcommand(1);

  std::string config_path, out_path, problem_path, point_path, recipe_name;
  SweepFlags sweep;
  vilab::GameConfig game;
  std::string mode = "symmetric_plus_skew";
  double lambda = 0.0, radius = vilab::kInfinity, gap_radius = 0.0, gap_tol = 1e-10;
  std::size_t points = 200;
  std::uint64_t seed = 0;
  bool print_only = false;

  auto* gen = app.add_subcommand("gen", "Generate a quadratic game and write a problem file");
  gen->add_option("--config", config_path, "Generator or experiment config (JSON)");
  gen->add_option("--out", out_path, "Problem file to write")->required();
  gen->add_option("--n", game.n, "Number of components");
  gen->add_option("--d", game.d, "Dimension");
  gen->add_option("--seed", game.seed, "Generator seed");
  gen->add_option("--mu-min", game.mu_min, "Monotonicity shift");
  gen->add_option("--mode", mode, "spectral_flip or symmetric_plus_skew");
  gen->add_option("--lambda", lambda, "L1 weight of the regularizer");
  gen->add_option("--radius", radius, "Box radius of the regularizer");

  auto* runc = app.add_subcommand("run", "Run an experiment config and write traces");
  runc->add_option("--config", config_path, "Experiment config (JSON)")->required();
  add_sweep_flags(runc, sweep);

  auto* recipe = app.add_subcommand("recipe", "Run a builtin experiment");
  recipe->add_option("name", recipe_name, "us_vs_is, vr_compare, distributed_compare, qsgda_vs_diana_fullbatch")
      ->required();
  recipe->add_flag("--print", print_only, "Print the config instead of running it");
  add_sweep_flags(recipe, sweep);

  auto* verify = app.add_subcommand("verify", "Check operator conditions and estimator bounds");
  verify->add_option("--config", config_path, "Experiment config (JSON)")->required();
  verify->add_option("--points", points, "Random points per check");
  verify->add_option("--seed", seed, "Seed of the check sampler");

  auto* gap = app.add_subcommand("gap", "Evaluate the restricted gap at a saved point");
  gap->add_option("--problem", problem_path, "Problem file")->required();
  gap->add_option("--point", point_path, "JSON array (or {\"x\": [...]}) with the point")->required();
  gap->add_option("--radius", gap_radius, "Box radius around x* (default 2 ||z - x*||_inf)");
  gap->add_option("--tol", gap_tol, "Gradient-mapping tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      if (mode == "spectral_flip")
        game.mode = vilab::GeneratorMode::SpectralFlip;
      else if (mode != "symmetric_plus_skew")
        throw vilab::ConfigError("unknown --mode '" + mode + "'");
      return cmd_gen(config_path, out_path, game, lambda, radius);
    }
    if (*runc || *recipe) {
      vilab::ExperimentConfig cfg =
          *runc ? vilab::load_experiment_config(config_path) : vilab::builtin_recipe(recipe_name);
      if (print_only) {
        std::cout << vilab::builtin_recipe_json(recipe_name).dump(2) << '\n';
        return kExitOk;
      }
      apply_sweep_flags(cfg, sweep);
      vilab::ExperimentOptions opt;
      opt.threads = sweep.threads;
      return report_summary(vilab::run_experiment(cfg, opt));
    }
    if (*verify) return cmd_verify(config_path, points, seed);
    if (*gap) return cmd_gap(problem_path, point_path, gap_radius, gap_tol);
  } catch (const vilab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
