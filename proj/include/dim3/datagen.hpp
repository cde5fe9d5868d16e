#pragma once
// Deterministic synthetic tables: uniform pairs, Zipf-skewed columns, and
// recursive-quadrant random graphs. One splitmix64 stream per table, so a
// fixed (parameters, seed) tuple always yields the same bytes.

#include <cstddef>
#include <cstdint>

#include "dim3/common.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

// splitmix64: a counter advanced by the golden-ratio increment, output run
// through the finalizer in common.hpp.
struct SplitMix64 {
  std::uint64_t state = 0;
  explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    return mix64(state);
  }

  // Multiply-shift range reduction onto [0, n); n >= 1.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// n_tuples pairs, each coordinate uniform in [0, n_max); left drawn before
// right within a row.
RawTable gen_uniform(std::size_t n_tuples, std::uint64_t n_max,
                     std::uint64_t seed);

enum class ZipfColumns : std::uint8_t { both, left, right };

// Chosen column(s) Zipf(alpha) over ranks 1..n_max (rank r has probability
// proportional to r^-alpha, assigned to id r-1); the other column uniform.
// alpha = 0 degenerates to the uniform distribution.
RawTable gen_zipf(std::size_t n_tuples, std::uint64_t n_max, double alpha,
                  ZipfColumns which, std::uint64_t seed);

// n_edges directed edges over 2^log2_n vertices by recursive quadrant
// descent with probabilities (a, b, c, d); duplicates are kept. Throws
// ConfigError unless the probabilities sum to 1 within 1e-9.
RawTable gen_rmat(int log2_n, std::size_t n_edges, double a, double b,
                  double c, double d, std::uint64_t seed);

}  // namespace dim3
