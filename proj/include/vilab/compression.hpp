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
#include <utility>
#include <vector>

#include "vilab/core.hpp"

namespace vilab {

enum class QuantizerKind { Identity, RandK };

/// Unbiased compressor: E[Q(x)] = x, E||Q(x) - x||^2 <= omega ||x||^2.
struct Quantizer {
  QuantizerKind kind = QuantizerKind::Identity;
  std::size_t k = 0;

  static Quantizer identity() { return {}; }
  static Quantizer rand_k(std::size_t k) {
    detail::require(k >= 1, "Quantizer: RandK needs k >= 1");
    return {QuantizerKind::RandK, k};
  }

  void validate(Index d) const {
    if (kind == QuantizerKind::RandK)
      detail::require(static_cast<Index>(k) <= d, "Quantizer: k exceeds dimension");
  }
};

inline const char* to_string(QuantizerKind k) {
  return k == QuantizerKind::Identity ? "identity" : "randk";
}

/// Sparse message. A dense message carries every coordinate and no indices.
struct CompressedVector {
  Index dim = 0;
  bool dense = false;
  std::vector<std::pair<Index, double>> entries;  // strictly increasing indices

  Vector densify() const {
    Vector v = Vector::Zero(dim);
    for (const auto& [i, val] : entries) v(i) = val;
    return v;
  }
};

inline double omega(const Quantizer& q, Index d) {
  if (q.kind == QuantizerKind::Identity) return 0.0;
  q.validate(d);
  return static_cast<double>(d) / static_cast<double>(q.k) - 1.0;
}

/// RandK keeps a uniform k-subset scaled by d/k. Identity (and RandK with
/// k = d) transmit densely.
inline CompressedVector compress(const Quantizer& q, const Vector& x, Rng& rng) {
  const Index d = x.size();
  q.validate(d);
  CompressedVector cv;
  cv.dim = d;
  if (q.kind == QuantizerKind::Identity || static_cast<Index>(q.k) == d) {
    cv.dense = true;
    cv.entries.reserve(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i) cv.entries.emplace_back(i, x(i));
    return cv;
  }
  const double scale = static_cast<double>(d) / static_cast<double>(q.k);
  for (std::size_t i : uniform_subset(rng, static_cast<std::size_t>(d), q.k))
    cv.entries.emplace_back(static_cast<Index>(i), scale * x(static_cast<Index>(i)));
  return cv;
}

inline int index_bits(Index d) {
  int bits = 0;
  while ((Index{1} << bits) < d) ++bits;
  return bits;
}

/// Wire size: dense d * value_bits; sparse entries * (value_bits + ceil(log2 d)).
inline std::uint64_t encoded_bits(const CompressedVector& cv, int value_bits = 64) {
  detail::require(value_bits == 32 || value_bits == 64, "encoded_bits: value_bits must be 32 or 64");
  const auto vb = static_cast<std::uint64_t>(value_bits);
  if (cv.dense) return static_cast<std::uint64_t>(cv.dim) * vb;
  return static_cast<std::uint64_t>(cv.entries.size()) *
         (vb + static_cast<std::uint64_t>(index_bits(cv.dim)));
}

struct WeightedVector {
  double probability;
  Vector value;
};

/// All outcomes of Q(x) with probabilities; RandK enumerates C(d, k) subsets.
inline std::vector<WeightedVector> enumerate_compress(const Quantizer& q, const Vector& x,
                                                      std::size_t max_outcomes = 100000) {
  const Index d = x.size();
  q.validate(d);
  if (q.kind == QuantizerKind::Identity || static_cast<Index>(q.k) == d) return {{1.0, x}};
  const std::size_t k = q.k;
  const std::size_t n = static_cast<std::size_t>(d);
  double count = 1.0;
  for (std::size_t t = 0; t < k; ++t) count = count * static_cast<double>(n - t) / static_cast<double>(t + 1);
  detail::require(count <= static_cast<double>(max_outcomes), "enumerate_compress: too many subsets");
  const double prob = 1.0 / std::round(count);
  const double scale = static_cast<double>(d) / static_cast<double>(k);
  std::vector<WeightedVector> out;
  std::vector<std::size_t> idx(k);
  for (std::size_t t = 0; t < k; ++t) idx[t] = t;
  while (true) {
    Vector v = Vector::Zero(d);
    for (std::size_t i : idx) v(static_cast<Index>(i)) = scale * x(static_cast<Index>(i));
    out.push_back({prob, std::move(v)});
    std::size_t pos = k;
    while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t t = pos; t < k; ++t) idx[t] = idx[t - 1] + 1;
  }
  return out;
}

}  // namespace vilab
