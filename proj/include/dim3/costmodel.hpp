#pragma once
// Machine cost constants and the three strategy decision functions:
//   f1  classical hash join vs the mapped matrix pipeline (whole query)
//   f3  scalar probe vs wide block intersection (per x row, per z column)
//   f2  sparse accumulator vs dense bitmap path (per z column)
// plus the exact pre-dedup join cardinality and the degree statistics the
// decisions run on.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dim3/common.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

struct CostConstants {
  double t_seqR = 0;    // sequential read, per element
  double t_randR = 0;   // dependent random read, per access
  double t_randRW = 0;  // dependent random read-modify-write, per access
  double t_hash = 0;    // plain hash table operation
  double t_map = 0;     // dictionary table operation
  double t_ECs = 0;     // scalar bitmap probe
  double t_ECd = 0;     // wide block intersection, per block
  std::uint32_t w = kBlockBits;
};

struct CalibrationOptions {
  std::uint64_t sample_bytes = 256ull << 20;  // working set per benchmark
  int runs = 5;                               // median taken across runs
  std::uint64_t ops = 1ull << 22;             // accesses timed per run
};

// Runs the microbenchmarks and returns medians. Ordering constraints
// (t_seqR <= t_randR <= t_randRW, all positive) are enforced by clamping.
CostConstants calibrate(const CalibrationOptions& opt = {});

// key=value persistence, version checked on load.
void save_constants(const std::filesystem::path& path, const CostConstants& c);
CostConstants load_constants(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Exact pre-dedup join cardinality: sum over y of deg_R(y) * deg_S(y).

struct OutJEstimate {
  std::uint64_t value = 0;
  bool saturated = false;  // true sum exceeded 2^64 - 1
};

OutJEstimate estimate_out_j(const CsrMatrix& r_by_y, const CsrMatrix& s_by_y);
OutJEstimate out_j_from_degrees(std::span<const std::uint32_t> deg_r,
                                std::span<const std::uint32_t> deg_s);

// Sampled estimate on raw tables, for the strategy gate that runs before any
// mapping exists. Exact when the probe-side table has at most `exact_limit`
// rows; otherwise strided samples of both tables, scaled (unbiased).
std::uint64_t estimate_out_j_raw(const RawTable& r, const RawTable& s,
                                 std::size_t exact_limit = 65536,
                                 std::size_t sample_rows = 16384);

// ---------------------------------------------------------------------------
// Degree statistics feeding f2/f3. m_x and m_z are post-collapse degrees.

struct DegreeStats {
  std::vector<std::uint32_t> m_x;  // per x row of R
  std::vector<std::uint32_t> m_z;  // per z row of S
  std::uint32_t y_card = 0;
  OutJEstimate out_j;
};

DegreeStats compute_degree_stats(const CsrMatrix& r_by_x,
                                 const CsrMatrix& s_by_z);

// ---------------------------------------------------------------------------
// f1 > 0 selects the classical join. Sizes are raw tuple counts.

double f1(std::uint64_t size_r, std::uint64_t size_s, std::uint64_t out_j,
          const CostConstants& c);

// Expected probe counts under the independence model. check_nonsimd is the
// expected scalar probes until a hit among m_x positions with per-position
// hit probability m_z / y_card (m_x when that probability is 0).
double check_nonsimd(double m_x, double m_z, double y_card);
// check_simd is the expected wide blocks examined among y_card / w blocks
// with per-block hit probability 1 - (1 - m_x * m_z / y_card^2)^w
// (y_card / w when that probability is 0).
double check_simd(double m_x, double m_z, double y_card, std::uint32_t w);

// f3 > 0 selects the wide block path for an (m_x, m_z) encounter.
double f3(double m_x, double m_z, std::uint32_t y_card, const CostConstants& c);

// Largest m_z with f3 <= 0, so that (m_z > threshold) <=> (f3 > 0) on
// m_z in [1, y_card]; 0 when f3(1) > 0, y_card + 1 when f3 is never positive.
// Found by binary search (f3 is increasing in m_z on [1, y_card]) and
// memoized per m_x.
class F3ThresholdCache {
 public:
  F3ThresholdCache(std::uint32_t y_card, const CostConstants& c)
      : y_card_(y_card), c_(c) {}
  std::uint32_t get(std::uint32_t m_x);
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

 private:
  std::uint32_t y_card_;
  CostConstants c_;
  std::unordered_map<std::uint32_t, std::uint32_t> memo_;
  std::uint64_t hits_ = 0, misses_ = 0;
};

std::uint32_t f3_threshold(std::uint32_t m_x, std::uint32_t y_card,
                           const CostConstants& c);

// ---------------------------------------------------------------------------
// f2 > 0 marks a z column dense. The dense-side cost is approximated on
// degree buckets: m_x grouped on a log10 scale (about ten buckets per
// decade), m_z into 100 equal-width groups of y_card / 100; each group is
// represented by the median of its actual values.

struct GlobalSizes {
  std::uint64_t x_card = 0, y_card = 0, z_card = 0;
  std::uint64_t r_nnz = 0, s_nnz = 0;
  std::uint64_t out_j = 0;
};

// Bucket key for an m_x value (m >= 1): floor(log10 m) * 10 + leading digit.
std::uint32_t mx_bucket_key(std::uint32_t m);
// Equal-width m_z group in [0, 99].
std::uint32_t mz_bucket_index(std::uint32_t m_z, std::uint32_t y_card);

class F2Evaluator {
 public:
  F2Evaluator(const DegreeStats& stats, const CostConstants& c);

  // f2 for column z: T_sparseBMM(z) - T_denseEC(z). The sparse side uses the
  // actual m_z; the dense side is memoized per m_z group.
  double score(Code z);
  std::uint64_t evaluations() const { return evaluations_; }

 private:
  double dense_cost(std::uint32_t mz_group);

  const DegreeStats& stats_;
  CostConstants c_;
  GlobalSizes g_;
  double sparse_fixed_ = 0;     // ((2|X| + |R|) t_seqR + 2|R| t_randR) / |Z|
  double out_unit_ = 0;         // (out_j / |S|) * (t_seqR + t_randRW)
  struct MxGroup {
    double median;
    std::uint64_t count;
  };
  std::vector<MxGroup> mx_groups_;
  std::vector<double> mz_group_median_;  // 100 entries, -1 when empty
  std::vector<double> dense_memo_;       // per mz group, NaN when unset
  std::uint64_t evaluations_ = 0;
};

// One-shot form of the per-column decision, for callers without an
// evaluator. stats must describe the full tables.
double f2(Code z, const DegreeStats& stats, const CostConstants& c);

}  // namespace dim3
