#pragma once
// Existence-check kernel over the dense bitmap panel. Per (x row, dense z)
// encounter it asks one boolean question, intersect-or-not, choosing between
// a scalar probe of the z bitmap and a wide block sweep by the f3 threshold
// on (m_x, m_z).

#include <cstdint>
#include <utility>
#include <vector>

#include "dim3/bitmap.hpp"
#include "dim3/common.hpp"
#include "dim3/costmodel.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

enum class DensePathMode : std::uint8_t { cost_based, force_wide, force_probe };

struct DenseEcStats {
  std::uint64_t wide_encounters = 0;   // (x, z) pairs answered by block sweep
  std::uint64_t probe_encounters = 0;  // (x, z) pairs answered by scalar probes
  std::uint64_t blocks_checked = 0;
  std::uint64_t probes_done = 0;
  std::uint64_t row_bitmaps_built = 0;
  std::uint64_t row_bitmap_bytes = 0;  // per worker
  std::uint64_t threshold_memo_hits = 0;
  std::uint64_t threshold_memo_misses = 0;
};

struct DenseOptions {
  int threads = 1;
  DensePathMode mode = DensePathMode::cost_based;
  MemoryBudget* budget = nullptr;
  // Per-z instrumentation (indexed by z code) for cache scoring; forces a
  // single-threaded run.
  std::vector<std::uint64_t>* z_wide_checks = nullptr;
  std::vector<std::uint64_t>* z_probe_checks = nullptr;
  std::vector<std::uint64_t>* z_results = nullptr;
};

// Emits distinct (x, z) pairs for the dense partition. Emission order is
// x ascending, panel order of z within x. out == null counts only.
std::uint64_t dense_ec(const CsrMatrix& r_by_x, const BitmapPanel& panel,
                       const CostConstants& c, const DenseOptions& opt = {},
                       std::vector<std::pair<Code, Code>>* out = nullptr,
                       DenseEcStats* stats = nullptr);

}  // namespace dim3
