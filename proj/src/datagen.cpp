#include "dim3/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dim3 {
namespace {

std::vector<double> zipf_cum(std::uint64_t n_max, double alpha) {
  std::vector<double> cum(n_max);
  double run = 0;
  for (std::uint64_t r = 1; r <= n_max; ++r) {
    run += std::pow(static_cast<double>(r), -alpha);
    cum[r - 1] = run;
  }
  return cum;
}

std::uint64_t zipf_draw(SplitMix64& rng, const std::vector<double>& cum) {
  double u = rng.unit() * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) --it;  // rounding can land exactly on the total
  return static_cast<std::uint64_t>(it - cum.begin());
}

}  // namespace

RawTable gen_uniform(std::size_t n_tuples, std::uint64_t n_max,
                     std::uint64_t seed) {
  if (n_max < 1) throw ConfigError("n_max must be at least 1");
  SplitMix64 rng(seed);
  RawTable t;
  t.left.ints.reserve(n_tuples);
  t.right.ints.reserve(n_tuples);
  for (std::size_t i = 0; i < n_tuples; ++i) {
    std::uint64_t a = rng.bounded(n_max);
    std::uint64_t b = rng.bounded(n_max);
    t.left.push_int(a);
    t.right.push_int(b);
  }
  return t;
}

RawTable gen_zipf(std::size_t n_tuples, std::uint64_t n_max, double alpha,
                  ZipfColumns which, std::uint64_t seed) {
  if (n_max < 1) throw ConfigError("n_max must be at least 1");
  if (!(alpha >= 0)) throw ConfigError("alpha must be nonnegative");
  SplitMix64 rng(seed);
  std::vector<double> cum = zipf_cum(n_max, alpha);
  bool zipf_left = which != ZipfColumns::right;
  bool zipf_right = which != ZipfColumns::left;
  RawTable t;
  t.left.ints.reserve(n_tuples);
  t.right.ints.reserve(n_tuples);
  for (std::size_t i = 0; i < n_tuples; ++i) {
    std::uint64_t a = zipf_left ? zipf_draw(rng, cum) : rng.bounded(n_max);
    std::uint64_t b = zipf_right ? zipf_draw(rng, cum) : rng.bounded(n_max);
    t.left.push_int(a);
    t.right.push_int(b);
  }
  return t;
}

RawTable gen_rmat(int log2_n, std::size_t n_edges, double a, double b,
                  double c, double d, std::uint64_t seed) {
  if (log2_n < 0 || log2_n > 62) throw ConfigError("log2_n out of range");
  if (a < 0 || b < 0 || c < 0 || d < 0)
    throw ConfigError("quadrant probabilities must be nonnegative");
  if (std::fabs(a + b + c + d - 1.0) > 1e-9)
    throw ConfigError("quadrant probabilities must sum to 1");
  SplitMix64 rng(seed);
  RawTable t;
  t.left.ints.reserve(n_edges);
  t.right.ints.reserve(n_edges);
  double ab = a + b;
  double abc = a + b + c;
  for (std::size_t e = 0; e < n_edges; ++e) {
    std::uint64_t src = 0, dst = 0;
    for (int level = log2_n - 1; level >= 0; --level) {
      double u = rng.unit();
      if (u < a) {
        // top-left quadrant: both bits stay 0
      } else if (u < ab) {
        dst |= 1ULL << level;
      } else if (u < abc) {
        src |= 1ULL << level;
      } else {
        src |= 1ULL << level;
        dst |= 1ULL << level;
      }
    }
    t.left.push_int(src);
    t.right.push_int(dst);
  }
  return t;
}

}  // namespace dim3
