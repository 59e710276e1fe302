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

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vilab/core.hpp"
#include "vilab/problem.hpp"
#include "vilab/solver.hpp"

namespace vilab {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// -----------------------------------------------------------------------------
// JSON helpers. Floats that must round-trip bit-exactly are stored as hex
// strings; plain JSON numbers are accepted on input.

namespace detail {

inline std::string key_path(const std::string& ctx, const std::string& key) {
  return ctx.empty() ? key : ctx + "." + key;
}

inline const json& require_key(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("expected an object at '" + (ctx.empty() ? "<root>" : ctx) + "'");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing key '" + key_path(ctx, key) + "'");
  return *it;
}

inline double as_double(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      return from_hex(v.get<std::string>());
    } catch (const ConfigError&) {
      throw ConfigError("malformed number at '" + where + "'");
    }
  }
  throw ConfigError("expected a number at '" + where + "'");
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    if constexpr (std::is_same_v<T, double>) {
      return as_double(*it, key_path(ctx, key));
    } else {
      return it->template get<T>();
    }
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("wrong type at '" + key_path(ctx, key) + "'");
  }
}

}  // namespace detail

inline json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(to_hex(v(i)));
  return a;
}

inline Vector vector_from_json(const json& a, const std::string& where) {
  if (!a.is_array()) throw ConfigError("expected an array at '" + where + "'");
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    v(static_cast<Index>(i)) = detail::as_double(a[i], where + "[" + std::to_string(i) + "]");
  return v;
}

/// Row-major array of rows.
inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

inline Matrix matrix_from_json(const json& a, Index d, const std::string& where) {
  if (!a.is_array() || static_cast<Index>(a.size()) != d)
    throw ConfigError("expected " + std::to_string(d) + " rows at '" + where + "'");
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i) {
    const Vector row = vector_from_json(a[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
    if (row.size() != d) throw ConfigError("row length mismatch at '" + where + "'");
    m.row(i) = row.transpose();
  }
  return m;
}

inline json to_json(const Regularizer& r) {
  if (r.kind == RegularizerKind::None) return {{"kind", "none"}};
  return {{"kind", "l1_box"}, {"lambda", to_hex(r.lambda)}, {"radius", to_hex(r.radius)}};
}

inline Regularizer regularizer_from_json(const json& j, const std::string& ctx) {
  const std::string kind = detail::get_or<std::string>(j, "kind", "none", ctx);
  if (kind == "none") return Regularizer::none();
  if (kind == "l1_box") {
    const double lambda = detail::as_double(detail::require_key(j, "lambda", ctx), detail::key_path(ctx, "lambda"));
    const double radius = detail::get_or<double>(j, "radius", kInfinity, ctx);
    try {
      return Regularizer::l1_box(lambda, radius);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(e.what()) + " at '" + ctx + "'");
    }
  }
  throw ConfigError("unknown regularizer kind '" + kind + "' at '" + detail::key_path(ctx, "kind") + "'");
}

inline json to_json(const GameConfig& g) {
  return {{"n", g.n},
          {"d", g.d},
          {"seed", g.seed},
          {"mu_min", g.mu_min},
          {"mode", to_string(g.mode)},
          {"offset_scale", g.offset_scale},
          {"sym_scale", g.sym_scale},
          {"skew_scale", g.skew_scale},
          {"active_dim", g.active_dim},
          {"outlier_scale", g.outlier_scale}};
}

inline GameConfig game_config_from_json(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("expected an object at '" + ctx + "'");
  GameConfig g;
  g.n = detail::get_or<std::size_t>(j, "n", g.n, ctx);
  g.d = detail::get_or<std::size_t>(j, "d", g.d, ctx);
  g.seed = detail::get_or<std::uint64_t>(j, "seed", g.seed, ctx);
  g.mu_min = detail::get_or<double>(j, "mu_min", g.mu_min, ctx);
  const std::string mode = detail::get_or<std::string>(j, "mode", to_string(g.mode), ctx);
  if (mode == "spectral_flip")
    g.mode = GeneratorMode::SpectralFlip;
  else if (mode == "symmetric_plus_skew")
    g.mode = GeneratorMode::SymmetricPlusSkew;
  else
    throw ConfigError("unknown generator mode '" + mode + "' at '" + detail::key_path(ctx, "mode") + "'");
  g.offset_scale = detail::get_or<double>(j, "offset_scale", g.offset_scale, ctx);
  g.sym_scale = detail::get_or<double>(j, "sym_scale", g.sym_scale, ctx);
  g.skew_scale = detail::get_or<double>(j, "skew_scale", g.skew_scale, ctx);
  g.active_dim = detail::get_or<std::size_t>(j, "active_dim", g.active_dim, ctx);
  g.outlier_scale = detail::get_or<double>(j, "outlier_scale", g.outlier_scale, ctx);
  return g;
}

// -----------------------------------------------------------------------------
// Problem files

inline json problem_to_json(const ProblemInstance& p) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "vilab.problem";
  j["n"] = p.size();
  j["d"] = p.dim();
  j["regularizer"] = to_json(p.reg);
  if (p.generator) j["generator"] = to_json(*p.generator);
  json comps = json::array();
  for (const auto& c : p.op.components())
    comps.push_back({{"matrix", matrix_to_json(c.matrix)}, {"offset", vector_to_json(c.offset)}});
  j["components"] = std::move(comps);
  if (p.x_star) {
    j["x_star"] = vector_to_json(*p.x_star);
    j["residual"] = to_hex(p.residual);
    j["residual_tol"] = to_hex(p.residual_tol);
  }
  return j;
}

/// Reads a problem file. Constants are recomputed; a stored solution is
/// kept as is and its residual re-evaluated.
inline ProblemInstance problem_from_json(const json& j) {
  const int version = detail::get_or<int>(j, "schema_version", kSchemaVersion, "");
  if (version != kSchemaVersion) throw ConfigError("unsupported schema_version " + std::to_string(version));
  const auto d = static_cast<Index>(detail::require_key(j, "d", "").get<std::int64_t>());
  const json& comps = detail::require_key(j, "components", "");
  if (!comps.is_array() || comps.empty()) throw ConfigError("'components' must be a nonempty array");
  std::vector<AffineComponent> list;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string ctx = "components[" + std::to_string(i) + "]";
    AffineComponent c;
    c.matrix = matrix_from_json(detail::require_key(comps[i], "matrix", ctx), d, ctx + ".matrix");
    c.offset = vector_from_json(detail::require_key(comps[i], "offset", ctx), ctx + ".offset");
    if (c.offset.size() != d) throw ConfigError("offset length mismatch at '" + ctx + "'");
    list.push_back(std::move(c));
  }
  ProblemInstance p;
  p.op = FiniteSumOperator(std::move(list));
  p.reg = j.contains("regularizer") ? regularizer_from_json(j["regularizer"], "regularizer") : Regularizer::none();
  if (j.contains("generator")) p.generator = game_config_from_json(j["generator"], "generator");
  try {
    p.constants = compute_constants(p.op);
  } catch (const NumericalError&) {
    p.constants.reset();
  }
  if (j.contains("x_star")) {
    p.x_star = vector_from_json(j["x_star"], "x_star");
    if (p.x_star->size() != d) throw ConfigError("x_star length mismatch");
    p.residual_tol = detail::get_or<double>(j, "residual_tol", 1e-11, "");
    const double gamma = p.constants ? 1.0 / p.constants->ell : 1.0;
    p.residual = fixed_point_residual(p.op, p.reg, gamma, *p.x_star);
  }
  return p;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline void save_problem(const ProblemInstance& p, const std::string& path) {
  write_text_file(path, problem_to_json(p).dump(1) + "\n");
}

inline ProblemInstance load_problem(const std::string& path) { return problem_from_json(read_json_file(path)); }

// -----------------------------------------------------------------------------
// Trace CSV

inline constexpr const char* kTraceHeader = "k,gamma,dist_sq,lyapunov,sigma_sq,oracle_calls,uplink_bits,gap";

namespace detail {

inline std::string csv_float(double v) { return std::isnan(v) ? std::string() : to_decimal(v); }

inline std::string csv_optional(const std::optional<double>& v) {
  return v ? csv_float(*v) : std::string();
}

}  // namespace detail

inline void write_trace_csv(const RunTrace& t, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& r : t.rows) {
    out << r.k << ',' << detail::csv_float(r.gamma) << ',' << detail::csv_float(r.dist_sq) << ','
        << detail::csv_float(r.lyapunov) << ',' << detail::csv_optional(r.sigma_sq) << ',' << r.oracle_calls
        << ',' << r.uplink_bits << ',' << detail::csv_optional(r.gap) << '\n';
  }
}

inline std::string trace_to_csv(const RunTrace& t) {
  std::ostringstream os;
  write_trace_csv(t, os);
  return os.str();
}

/// Parses the trace schema. Empty cells become NaN / absent.
inline RunTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw ConfigError("trace CSV: unexpected header");
  RunTrace t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) throw ConfigError("trace CSV: line " + std::to_string(lineno) + " has wrong arity");
    auto num = [&](const std::string& s) {
      if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (*end != '\0') throw ConfigError("trace CSV: bad number on line " + std::to_string(lineno));
      return v;
    };
    TraceRow r;
    r.k = static_cast<std::size_t>(std::stoull(cells[0]));
    r.gamma = num(cells[1]);
    r.dist_sq = num(cells[2]);
    r.lyapunov = num(cells[3]);
    if (!cells[4].empty()) r.sigma_sq = num(cells[4]);
    r.oracle_calls = std::stoull(cells[5]);
    r.uplink_bits = std::stoull(cells[6]);
    if (!cells[7].empty()) r.gap = num(cells[7]);
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace vilab
