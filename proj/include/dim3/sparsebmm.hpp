#pragma once
// Sparse boolean row-times-matrix over the sparse partition of S, with a
// stamp accumulator for output dedup. One pass, no sorting, no hashing:
// SPA[z] holds the last x that emitted z, so each (x, z) pair appears once.

#include <cstdint>
#include <utility>
#include <vector>

#include "dim3/common.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

struct SpaStats {
  std::uint64_t inner_count = 0;      // inner-body executions (one per join tuple)
  std::uint64_t spa_allocations = 0;  // stamp arrays allocated
  std::uint64_t spa_entries = 0;      // stamps per array (|Z|)
};

struct SparseOptions {
  int threads = 1;
  MemoryBudget* budget = nullptr;
  // Per-z instrumentation for cache scoring; forces a single-threaded run.
  std::vector<std::uint64_t>* z_checks = nullptr;
  std::vector<std::uint64_t>* z_results = nullptr;
};

// Emits distinct (x, z) pairs with x joined through the shared y axis:
// for each x row of r, for each y, for each z in the y row of s_sparse.
// Emission order is x ascending, first encounter of z within x. out == null
// counts without materializing. Returns the emitted pair count.
std::uint64_t sparse_bmm(const CsrMatrix& r_by_x, const CsrMatrix& s_sparse_by_y,
                         Code z_card, const SparseOptions& opt = {},
                         std::vector<std::pair<Code, Code>>* out = nullptr,
                         SpaStats* stats = nullptr);

}  // namespace dim3
