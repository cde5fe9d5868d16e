#pragma once
// Shared test scaffolding: deterministic cost constants, brute-force oracles,
// random instance generation, and result canonicalization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dim3/costmodel.hpp"
#include "dim3/datagen.hpp"
#include "dim3/engine.hpp"
#include "dim3/relation.hpp"

namespace testsup {

using Pair = std::pair<std::uint64_t, std::uint64_t>;
using PairSet = std::set<Pair>;

// Fixed constants with the measured ordering of the real machine, so
// strategy decisions in tests never depend on calibration noise.
inline dim3::CostConstants test_consts() {
  dim3::CostConstants c;
  c.t_seqR = 0.9e-9;
  c.t_randR = 140e-9;
  c.t_randRW = 140e-9;
  c.t_hash = 440e-9;
  c.t_map = 330e-9;
  c.t_ECs = 11e-9;
  c.t_ECd = 1.2e-9;
  c.w = 256;
  return c;
}

// Brute-force distinct (x, z) across the join, y-indexed.
inline PairSet oracle_pairs(const dim3::RawTable& r, const dim3::RawTable& s) {
  PairSet out;
  std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> by_y;
  for (std::size_t i = 0; i < s.size(); ++i)
    by_y[s.right.ints[i]].push_back(s.left.ints[i]);
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto it = by_y.find(r.right.ints[i]);
    if (it == by_y.end()) continue;
    for (std::uint64_t z : it->second) out.insert({r.left.ints[i], z});
  }
  return out;
}

// Join size over distinct tuples (what the mapped pipeline operates on).
inline std::uint64_t oracle_out_j_distinct(const dim3::RawTable& r,
                                           const dim3::RawTable& s) {
  std::set<Pair> rd, sd;
  for (std::size_t i = 0; i < r.size(); ++i)
    rd.insert({r.left.ints[i], r.right.ints[i]});
  for (std::size_t i = 0; i < s.size(); ++i)
    sd.insert({s.left.ints[i], s.right.ints[i]});
  std::unordered_map<std::uint64_t, std::uint64_t> dr, ds;
  for (auto [x, y] : rd) dr[y]++;
  for (auto [z, y] : sd) ds[y]++;
  std::uint64_t out = 0;
  for (auto [y, d] : dr) {
    auto it = ds.find(y);
    if (it != ds.end()) out += d * it->second;
  }
  return out;
}

// Join size with multiplicities (the classical intermediate).
inline std::uint64_t oracle_out_j_bag(const dim3::RawTable& r,
                                      const dim3::RawTable& s) {
  std::unordered_map<std::uint64_t, std::uint64_t> ds;
  for (std::size_t i = 0; i < s.size(); ++i) ds[s.right.ints[i]]++;
  std::uint64_t out = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto it = ds.find(r.right.ints[i]);
    if (it != ds.end()) out += it->second;
  }
  return out;
}

inline PairSet result_set(const dim3::ResultSet& raw) {
  PairSet out;
  for (std::size_t i = 0; i < raw.raw_x.ints.size(); ++i)
    out.insert({raw.raw_x.ints[i], raw.raw_z.ints[i]});
  return out;
}

inline std::vector<Pair> result_vec(const dim3::ResultSet& raw) {
  std::vector<Pair> out;
  out.reserve(raw.raw_x.ints.size());
  for (std::size_t i = 0; i < raw.raw_x.ints.size(); ++i)
    out.push_back({raw.raw_x.ints[i], raw.raw_z.ints[i]});
  return out;
}

struct Instance {
  dim3::RawTable r, s;
};

// Random join-project instance: cards up to 256, sizes up to 5000, tuple
// densities log-spaced in [1e-3, 0.5]. Values are optionally strided or
// lifted past 2^32 to force dictionary mapping.
inline Instance random_instance(dim3::SplitMix64& rng,
                                std::uint64_t max_card = 256,
                                std::uint64_t max_rows = 5000,
                                std::uint64_t out_j_cap = 500000) {
  for (;;) {
    std::uint64_t xc = 1 + rng.bounded(max_card);
    std::uint64_t yc = 1 + rng.bounded(max_card);
    std::uint64_t zc = 1 + rng.bounded(max_card);
    auto density = [&]() {
      double lg = -3.0 + rng.unit() * (std::log10(0.5) + 3.0);
      return std::pow(10.0, lg);
    };
    auto rows = [&](std::uint64_t a, std::uint64_t b) {
      double want = density() * static_cast<double>(a) * static_cast<double>(b);
      auto n = static_cast<std::uint64_t>(want + 0.5);
      return std::min<std::uint64_t>(std::max<std::uint64_t>(n, 1), max_rows);
    };
    std::uint64_t nr = rows(xc, yc);
    std::uint64_t ns = rows(zc, yc);
    double est = static_cast<double>(nr) * static_cast<double>(ns) /
                 static_cast<double>(yc);
    if (est > static_cast<double>(out_j_cap)) continue;

    std::uint64_t x_mul = 1, x_add = 0, z_mul = 1, z_add = 0, y_mul = 1;
    std::uint64_t mode = rng.bounded(4);
    if (mode == 1) {  // strided values, still small
      x_mul = 3 + rng.bounded(97);
      z_mul = 3 + rng.bounded(97);
      y_mul = 2 + rng.bounded(31);
    } else if (mode == 2) {  // beyond the natural-key range
      x_add = (1ull << 32) + rng.bounded(1000);
      z_add = (1ull << 33) + rng.bounded(1000);
    }

    Instance inst;
    for (std::uint64_t i = 0; i < nr; ++i) {
      inst.r.left.push_int(rng.bounded(xc) * x_mul + x_add);
      inst.r.right.push_int(rng.bounded(yc) * y_mul);
    }
    for (std::uint64_t i = 0; i < ns; ++i) {
      inst.s.left.push_int(rng.bounded(zc) * z_mul + z_add);
      inst.s.right.push_int(rng.bounded(yc) * y_mul);
    }
    return inst;
  }
}

}  // namespace testsup
