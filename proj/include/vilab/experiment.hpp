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

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "vilab/distributed.hpp"
#include "vilab/estimators.hpp"
#include "vilab/io.hpp"
#include "vilab/problem.hpp"
#include "vilab/solver.hpp"

namespace vilab {

inline constexpr const char* kCodeVersion = "vilab-0.1.0";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

enum class StepRuleKind { Theory, Constant, Decreasing };

struct StepRule {
  StepRuleKind kind = StepRuleKind::Theory;
  double gamma = 0.0;  // Constant only
  double scale = 1.0;  // multiplies the theory step
  bool grid_search = false;
};

/// One method of an experiment; the estimator body is resolved against the
/// prepared problem (importance weights and default p need its constants).
struct MethodConfig {
  std::string label;
  json body;
  StepRule step;
};

struct MetricsConfig {
  std::size_t record_every = 1;
  bool sigma_sq = true;
  bool gap = false;
  double gap_radius = 0.0;  // 0 selects 2 ||x0 - x*||_inf
};

struct ExperimentConfig {
  std::string name = "experiment";
  json problem;
  json x0 = {{"kind", "zero"}};
  std::vector<MethodConfig> methods;
  std::size_t iterations = 0;
  std::uint64_t oracle_budget = 0;
  std::vector<std::uint64_t> seeds{0};
  MetricsConfig metrics;
  std::string output_dir = "out";
  json source;  // canonical form used for hashing
};

/// Grid of multipliers applied to the theory step when grid_search is set.
inline const std::vector<double>& step_grid() {
  static const std::vector<double> g{0.25, 0.5, 1.0, 2.0, 4.0};
  return g;
}

namespace detail {

inline const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> k{"full_batch", "sgda_as", "lsvrgda", "saga", "csgda",
                                          "sega",       "qsgda",   "diana",   "vr_diana"};
  return k;
}

inline StepRule parse_step(const json& j, const std::string& ctx) {
  StepRule s;
  if (j.is_null()) return s;
  const std::string rule = get_or<std::string>(j, "rule", "theory", ctx);
  if (rule == "theory") {
    s.kind = StepRuleKind::Theory;
  } else if (rule == "constant") {
    s.kind = StepRuleKind::Constant;
    s.gamma = as_double(require_key(j, "gamma", ctx), key_path(ctx, "gamma"));
    if (!(s.gamma > 0.0)) throw ConfigError("'" + key_path(ctx, "gamma") + "' must be positive");
  } else if (rule == "decreasing") {
    s.kind = StepRuleKind::Decreasing;
  } else {
    throw ConfigError("unknown step rule '" + rule + "' at '" + key_path(ctx, "rule") + "'");
  }
  s.scale = get_or<double>(j, "scale", 1.0, ctx);
  if (!(s.scale > 0.0)) throw ConfigError("'" + key_path(ctx, "scale") + "' must be positive");
  s.grid_search = get_or<bool>(j, "grid_search", false, ctx);
  if (s.grid_search && s.kind != StepRuleKind::Theory)
    throw ConfigError("grid_search requires the theory rule at '" + ctx + "'");
  return s;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  const int version = detail::get_or<int>(j, "schema_version", kSchemaVersion, "");
  if (version != kSchemaVersion) throw ConfigError("unsupported schema_version " + std::to_string(version));
  ExperimentConfig c;
  c.source = j;
  c.name = detail::get_or<std::string>(j, "name", c.name, "");
  if (c.name.empty() || c.name.find('/') != std::string::npos) throw ConfigError("invalid experiment name");
  c.problem = detail::require_key(j, "problem", "");
  if (!c.problem.contains("generator") && !c.problem.contains("file"))
    throw ConfigError("'problem' needs a 'generator' or a 'file'");
  if (c.problem.contains("generator")) game_config_from_json(c.problem["generator"], "problem.generator");
  if (c.problem.contains("regularizer")) regularizer_from_json(c.problem["regularizer"], "problem.regularizer");
  if (j.contains("x0")) c.x0 = j["x0"];

  const json& methods = detail::require_key(j, "methods", "");
  if (!methods.is_array() || methods.empty()) throw ConfigError("no methods");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const std::string ctx = "methods[" + std::to_string(i) + "]";
    const json& m = methods[i];
    const std::string est = detail::require_key(m, "estimator", ctx).get<std::string>();
    const auto& known = detail::known_estimators();
    if (std::find(known.begin(), known.end(), est) == known.end())
      throw ConfigError("unknown estimator '" + est + "' at '" + ctx + ".estimator'");
    MethodConfig mc;
    mc.label = detail::get_or<std::string>(m, "label", est, ctx);
    mc.body = m;
    mc.step = detail::parse_step(m.value("stepsize", json()), ctx + ".stepsize");
    for (const auto& other : c.methods)
      if (other.label == mc.label) throw ConfigError("duplicate method label '" + mc.label + "'");
    c.methods.push_back(std::move(mc));
  }
  c.iterations = detail::get_or<std::size_t>(j, "iterations", 0, "");
  c.oracle_budget = detail::get_or<std::uint64_t>(j, "oracle_budget", 0, "");
  if (c.iterations == 0 && c.oracle_budget == 0) throw ConfigError("set 'iterations' or 'oracle_budget'");
  if (c.iterations == 0) c.iterations = static_cast<std::size_t>(c.oracle_budget);
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (c.seeds.empty()) throw ConfigError("'seeds' must not be empty");
  if (j.contains("metrics")) {
    const json& mj = j["metrics"];
    c.metrics.record_every = detail::get_or<std::size_t>(mj, "record_every", 1, "metrics");
    if (c.metrics.record_every == 0) throw ConfigError("'metrics.record_every' must be >= 1");
    c.metrics.sigma_sq = detail::get_or<bool>(mj, "sigma_sq", true, "metrics");
    c.metrics.gap = detail::get_or<bool>(mj, "gap", false, "metrics");
    c.metrics.gap_radius = detail::get_or<double>(mj, "gap_radius", 0.0, "metrics");
  }
  c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir, "");
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_json_file(path));
}

// -----------------------------------------------------------------------------
// Resolution against a prepared problem

inline Quantizer quantizer_from_json(const json& j, const std::string& ctx) {
  if (j.is_null()) return Quantizer::identity();
  const std::string kind = detail::get_or<std::string>(j, "kind", "identity", ctx);
  if (kind == "identity") return Quantizer::identity();
  if (kind == "randk") {
    const auto k = detail::require_key(j, "k", ctx).get<std::size_t>();
    if (k == 0) throw ConfigError("'" + detail::key_path(ctx, "k") + "' must be >= 1");
    return Quantizer::rand_k(k);
  }
  throw ConfigError("unknown quantizer '" + kind + "' at '" + ctx + "'");
}

inline MethodSpec resolve_method(const json& m, const ProblemInstance& problem, const std::string& ctx) {
  const std::string est = m.at("estimator").get<std::string>();
  const std::size_t n = problem.size();
  if (est == "full_batch") return EstimatorKind{FullBatch{}};
  if (est == "sgda_as") {
    const auto kind = sampling_kind_from_string(detail::get_or<std::string>(m, "sampling", "uniform", ctx));
    const auto b = detail::get_or<std::size_t>(m, "batch", 1, ctx);
    if (b == 0 || (kind == SamplingKind::WithoutReplacement && b > n))
      throw ConfigError("invalid batch at '" + ctx + ".batch'");
    if (kind == SamplingKind::Importance)
      return EstimatorKind{SgdaAS{SamplingScheme::importance(problem.require_constants().ell_i, b)}};
    if (kind == SamplingKind::WithoutReplacement) return EstimatorKind{SgdaAS{SamplingScheme::without_replacement(b)}};
    return EstimatorKind{SgdaAS{SamplingScheme::uniform(b)}};
  }
  if (est == "lsvrgda") {
    const double p = detail::get_or<double>(m, "p", 1.0 / static_cast<double>(n), ctx);
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("'" + ctx + ".p' must lie in (0, 1]");
    return EstimatorKind{LSvrgda{p}};
  }
  if (est == "saga") return EstimatorKind{SagaSgda{}};
  if (est == "csgda") return EstimatorKind{Csgda{}};
  if (est == "sega") return EstimatorKind{SegaSgda{}};

  DistributedSpec ds;
  ds.config.method = est == "qsgda" ? DistributedMethod::Qsgda
                     : est == "diana" ? DistributedMethod::Diana
                                      : DistributedMethod::VrDiana;
  ds.n_workers = detail::get_or<std::size_t>(m, "n_workers", 10, ctx);
  if (ds.n_workers == 0 || ds.n_workers > n) throw ConfigError("'" + ctx + ".n_workers' must lie in [1, n]");
  ds.config.quantizer = quantizer_from_json(m.value("quantizer", json()), ctx + ".quantizer");
  if (ds.config.quantizer.kind == QuantizerKind::RandK && static_cast<Index>(ds.config.quantizer.k) > problem.dim())
    throw ConfigError("'" + ctx + ".quantizer.k' exceeds the dimension");
  ds.config.alpha = detail::get_or<double>(m, "alpha", std::numeric_limits<double>::quiet_NaN(), ctx);
  ds.config.p = detail::get_or<double>(m, "p", std::numeric_limits<double>::quiet_NaN(), ctx);
  ds.config.shared_coin = detail::get_or<bool>(m, "shared_coin", false, ctx);
  ds.config.value_bits = detail::get_or<int>(m, "value_bits", 64, ctx);
  if (m.contains("sigma_i")) {
    const json& s = m["sigma_i"];
    ds.noise_sigma = s.is_array() ? s.get<std::vector<double>>() : std::vector<double>{s.get<double>()};
  }
  auto shards = partition(problem.op, ds.n_workers);
  try {
    set_noise(shards, ds.noise_sigma);
    resolve_parameters(ds.config, shards);
    local_mode(ds.config.method, shards);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()) + " at '" + ctx + "'");
  }
  return ds;
}

inline TheoryParams method_theory(const MethodSpec& spec, const ProblemInstance& problem) {
  if (const auto* e = std::get_if<EstimatorKind>(&spec)) return theory_params(*e, problem);
  const auto& ds = std::get<DistributedSpec>(spec);
  auto shards = partition(problem.op, ds.n_workers);
  set_noise(shards, ds.noise_sigma);
  return distributed_theory_params(ds.config, problem, shards);
}

inline ProblemInstance prepare_experiment_problem(const ExperimentConfig& cfg) {
  const double tol = detail::get_or<double>(cfg.problem, "solve_tol", 1e-11, "problem");
  if (cfg.problem.contains("file")) {
    ProblemInstance p = load_problem(cfg.problem["file"].get<std::string>());
    if (cfg.problem.contains("regularizer")) {
      p.reg = regularizer_from_json(cfg.problem["regularizer"], "problem.regularizer");
      p.x_star.reset();
    }
    if (!p.constants) p.constants = compute_constants(p.op);
    if (!p.x_star || !(p.residual <= tol)) {
      auto ref = solve_reference(p.op, p.reg, p.constants->ell, tol);
      p.x_star = std::move(ref.x);
      p.residual = ref.residual;
    }
    p.residual_tol = tol;
    return p;
  }
  const GameConfig g = game_config_from_json(cfg.problem["generator"], "problem.generator");
  const Regularizer reg = cfg.problem.contains("regularizer")
                              ? regularizer_from_json(cfg.problem["regularizer"], "problem.regularizer")
                              : Regularizer::none();
  return prepare_problem(generate_quadratic_game(g), reg, tol, g);
}

inline Vector initial_point(const json& x0, Index d) {
  const std::string kind = detail::get_or<std::string>(x0, "kind", "zero", "x0");
  if (kind == "zero") return Vector::Zero(d);
  if (kind == "gaussian") {
    Rng rng(detail::get_or<std::uint64_t>(x0, "seed", 0, "x0"));
    return gaussian_vector(rng, d, detail::get_or<double>(x0, "scale", 1.0, "x0"));
  }
  if (kind == "point") {
    Vector v = vector_from_json(detail::require_key(x0, "value", "x0"), "x0.value");
    if (v.size() != d) throw ConfigError("'x0.value' has the wrong dimension");
    return v;
  }
  throw ConfigError("unknown x0 kind '" + kind + "'");
}

// -----------------------------------------------------------------------------
// Running

struct RunRecord {
  std::string method;
  std::uint64_t seed = 0;
  std::string file;
  bool diverged = false;
  std::size_t divergence_iteration = 0;
  double final_relative_dist_sq = 0.0;
  std::uint64_t oracle_calls = 0;
};

struct ExperimentSummary {
  std::string directory;
  json manifest;
  std::vector<RunRecord> runs;
  std::vector<RunTrace> traces;  // same order as runs when kept

  bool any_diverged() const {
    for (const auto& r : runs)
      if (r.diverged) return true;
    return false;
  }
};

struct ExperimentOptions {
  std::size_t threads = 1;
  bool write_files = true;
  bool keep_traces = false;
};

namespace detail {

struct PlannedMethod {
  std::string label;
  MethodSpec spec;
  StepsizeSchedule schedule;
  TheoryParams theory;
  json description;
};

inline StepsizeSchedule schedule_for(const StepRule& rule, const TheoryParams& tp, double mu, std::size_t K,
                                     double multiplier) {
  switch (rule.kind) {
    case StepRuleKind::Constant: return ConstantStep{rule.gamma};
    case StepRuleKind::Decreasing: return decreasing_schedule(tp, mu, K);
    case StepRuleKind::Theory: break;
  }
  return ConstantStep{theory_stepsize(tp, mu) * rule.scale * multiplier};
}

inline RunOptions run_options(const ExperimentConfig& cfg, std::uint64_t seed, const std::optional<BoxSet>& box) {
  RunOptions o;
  o.iterations = cfg.iterations;
  o.seed = seed;
  o.record_every = cfg.metrics.record_every;
  o.max_oracle_calls = cfg.oracle_budget;
  o.track_sigma = cfg.metrics.sigma_sq;
  o.gap_box = box;
  return o;
}

inline double last_quartile_mean(const RunTrace& t) {
  const std::size_t first = t.rows.size() - (t.rows.size() + 3) / 4;
  double acc = 0.0;
  for (std::size_t i = first; i < t.rows.size(); ++i) acc += t.rows[i].dist_sq;
  return acc / static_cast<double>(t.rows.size() - first);
}

inline std::string schedule_text(const StepsizeSchedule& s) {
  if (const auto* c = std::get_if<ConstantStep>(&s)) return "constant:" + to_decimal(c->gamma);
  const auto& d = std::get<StichDecreasing>(s);
  return "decreasing:h=" + to_decimal(d.h) + ",a=" + to_decimal(d.a) + ",K=" + std::to_string(d.K);
}

}  // namespace detail

/// Runs every (method, seed) cell and writes
/// {output_dir}/{name}/{label}_{seed}.csv plus manifest.json.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opt = {}) {
  if (cfg.methods.empty()) throw ConfigError("no methods");
  const ProblemInstance problem = prepare_experiment_problem(cfg);
  const auto& c = problem.require_constants();
  const Vector x0 = initial_point(cfg.x0, problem.dim());
  std::optional<BoxSet> box;
  if (cfg.metrics.gap)
    box = cfg.metrics.gap_radius > 0.0 ? BoxSet(problem.require_solution(), cfg.metrics.gap_radius)
                                       : BoxSet::around_solution(problem.require_solution(), x0);

  std::vector<detail::PlannedMethod> plan;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const auto& mc = cfg.methods[i];
    detail::PlannedMethod pm;
    pm.label = mc.label;
    pm.spec = resolve_method(mc.body, problem, "methods[" + std::to_string(i) + "]");
    pm.theory = method_theory(pm.spec, problem);
    pm.schedule = detail::schedule_for(mc.step, pm.theory, c.mu, cfg.iterations, 1.0);
    json grid = json::array();
    if (mc.step.grid_search) {
      double best = kInfinity;
      for (double mult : step_grid()) {
        const auto sched = detail::schedule_for(mc.step, pm.theory, c.mu, cfg.iterations, mult);
        const RunTrace t = run(problem, pm.spec, sched, x0, detail::run_options(cfg, cfg.seeds.front(), std::nullopt));
        const double final = t.diverged ? kInfinity : detail::last_quartile_mean(t);
        grid.push_back({{"multiplier", mult}, {"tail_dist_sq", t.diverged ? json("diverged") : json(final)}});
        if (final < best) {
          best = final;
          pm.schedule = sched;
        }
      }
    }
    pm.description = {{"label", pm.label},
                      {"method", method_name(pm.spec)},
                      {"schedule", detail::schedule_text(pm.schedule)},
                      {"theory",
                       {{"A", pm.theory.A},
                        {"B", pm.theory.B},
                        {"C", pm.theory.C},
                        {"rho", pm.theory.rho},
                        {"D1", pm.theory.D1},
                        {"D2", pm.theory.D2},
                        {"M", pm.theory.M}}}};
    if (!grid.empty()) pm.description["grid_search"] = grid;
    plan.push_back(std::move(pm));
  }

  ExperimentSummary summary;
  const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / cfg.name;
  summary.directory = dir.string();
  if (opt.write_files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  }

  const std::size_t cells = plan.size() * cfg.seeds.size();
  summary.runs.resize(cells);
  if (opt.keep_traces) summary.traces.resize(cells);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (std::size_t cell = next++; cell < cells; cell = next++) {
      try {
        const auto& pm = plan[cell / cfg.seeds.size()];
        const std::uint64_t seed = cfg.seeds[cell % cfg.seeds.size()];
        RunTrace t = run(problem, pm.spec, pm.schedule, x0, detail::run_options(cfg, seed, box));
        t.method = pm.label;
        RunRecord& rec = summary.runs[cell];
        rec.method = pm.label;
        rec.seed = seed;
        rec.file = pm.label + "_" + std::to_string(seed) + ".csv";
        rec.diverged = t.diverged;
        rec.divergence_iteration = t.divergence_iteration;
        rec.final_relative_dist_sq = t.rows.back().dist_sq / t.rows.front().dist_sq;
        rec.oracle_calls = t.rows.back().oracle_calls;
        if (opt.write_files) write_text_file((dir / rec.file).string(), trace_to_csv(t));
        if (opt.keep_traces) summary.traces[cell] = std::move(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(opt.threads, cells));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  json m;
  m["schema_version"] = kSchemaVersion;
  m["experiment"] = cfg.name;
  m["code_version"] = kCodeVersion;
  m["config_hash"] = hex64(fnv1a(cfg.source.dump() + "|" + kCodeVersion));
  m["config"] = cfg.source;
  m["problem"] = {{"n", problem.size()}, {"d", problem.dim()}, {"regularizer", to_json(problem.reg)}};
  if (problem.generator) m["problem"]["generator"] = to_json(*problem.generator);
  m["constants"] = {{"mu", c.mu},           {"ell", c.ell},         {"ell_bar", c.ell_bar},
                    {"ell_max", c.ell_max}, {"ell_hat", c.ell_hat}};
  m["x_star"] = vector_to_json(problem.require_solution());
  m["residual"] = problem.residual;
  if (box) m["gap_box"] = {{"center", vector_to_json(box->center)}, {"radius", box->radius}};
  m["methods"] = json::array();
  for (const auto& pm : plan) m["methods"].push_back(pm.description);
  m["runs"] = json::array();
  for (const auto& r : summary.runs)
    m["runs"].push_back({{"method", r.method},
                         {"seed", r.seed},
                         {"file", r.file},
                         {"diverged", r.diverged},
                         {"divergence_iteration", r.divergence_iteration},
                         {"final_relative_dist_sq", r.final_relative_dist_sq},
                         {"oracle_calls", r.oracle_calls}});
  if (opt.write_files) write_text_file((dir / "manifest.json").string(), m.dump(2) + "\n");
  summary.manifest = std::move(m);
  return summary;
}

// -----------------------------------------------------------------------------
// Builtin recipes

inline std::vector<std::string> recipe_names() {
  return {"us_vs_is", "vr_compare", "distributed_compare", "qsgda_vs_diana_fullbatch"};
}

/// Desk-scale configurations for the standard comparisons.
inline json builtin_recipe_json(const std::string& name) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = name;
  j["output_dir"] = "out";
  if (name == "us_vs_is") {
    j["problem"] = {{"generator",
                     {{"n", 100}, {"d", 20}, {"seed", 7}, {"mu_min", 1.0}, {"offset_scale", 100.0},
                      {"outlier_scale", 100.0}}}};
    const json step = {{"rule", "decreasing"}};
    j["methods"] = json::array(
        {{{"label", "uniform"}, {"estimator", "sgda_as"}, {"sampling", "uniform"}, {"stepsize", step}},
         {{"label", "importance"}, {"estimator", "sgda_as"}, {"sampling", "importance"}, {"stepsize", step}}});
    j["x0"] = {{"kind", "gaussian"}, {"scale", 10.0}, {"seed", 99}};
    j["oracle_budget"] = 2000;
    j["seeds"] = json::array();
    for (int s = 0; s < 20; ++s) j["seeds"].push_back(s);
    j["metrics"] = {{"record_every", 10}};
  } else if (name == "vr_compare") {
    j["problem"] = {{"generator", {{"n", 50}, {"d", 20}, {"seed", 3}, {"mu_min", 1.0}, {"offset_scale", 100.0}}}};
    j["methods"] = json::array({{{"estimator", "full_batch"}},
                                {{"estimator", "sgda_as"}},
                                {{"estimator", "lsvrgda"}},
                                {{"estimator", "saga"}},
                                {{"estimator", "sega"}},
                                {{"estimator", "vr_diana"}, {"n_workers", 5}}});
    j["oracle_budget"] = 10000;
    j["seeds"] = {0, 1, 2};
    j["metrics"] = {{"record_every", 20}};
  } else if (name == "distributed_compare") {
    j["problem"] = {{"generator", {{"n", 100}, {"d", 100}, {"seed", 5}, {"mu_min", 1.0}, {"offset_scale", 100.0}}}};
    const json q = {{"kind", "randk"}, {"k", 5}};
    j["methods"] = json::array({{{"estimator", "qsgda"}, {"n_workers", 10}, {"quantizer", q}},
                                {{"estimator", "diana"}, {"n_workers", 10}, {"quantizer", q}},
                                {{"estimator", "vr_diana"}, {"n_workers", 10}, {"quantizer", q}},
                                {{"label", "uncompressed"}, {"estimator", "diana"}, {"n_workers", 10}}});
    j["iterations"] = 4000;
    j["seeds"] = {0, 1, 2};
    j["metrics"] = {{"record_every", 20}};
  } else if (name == "qsgda_vs_diana_fullbatch") {
    j["problem"] = {{"generator", {{"n", 100}, {"d", 100}, {"seed", 11}, {"mu_min", 1.0}, {"offset_scale", 100.0}}}};
    const json q = {{"kind", "randk"}, {"k", 5}};
    j["methods"] =
        json::array({{{"estimator", "qsgda"}, {"n_workers", 10}, {"quantizer", q}, {"sigma_i", 0.0}},
                     {{"estimator", "diana"}, {"n_workers", 10}, {"quantizer", q}, {"sigma_i", 0.0}}});
    j["iterations"] = 4000;
    j["seeds"] = {0, 1, 2};
    j["metrics"] = {{"record_every", 20}};
  } else {
    throw ConfigError("unknown recipe '" + name + "'");
  }
  return j;
}

inline ExperimentConfig builtin_recipe(const std::string& name) {
  return parse_experiment_config(builtin_recipe_json(name));
}

}  // namespace vilab
