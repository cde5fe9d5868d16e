#pragma once
// Baseline join-project: hash join on the shared y column followed by
// hash-set deduplication of the projected (x, z) pairs. Runs directly on raw
// tables, no code mapping.

#include <cstdint>

#include "dim3/common.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

struct ClassicalStats {
  std::uint64_t intermediate_pairs = 0;  // join output size before dedup
  std::uint64_t build_keys = 0;          // distinct y values on the build side
};

// Build side is s (keyed by y, carrying z); probe side is r. Output pairs are
// raw values, first-encounter order. count_only skips materialization.
ResultSet hash_join_dedup(const RawTable& r, const RawTable& s,
                          bool count_only = false,
                          MemoryBudget* budget = nullptr,
                          ClassicalStats* stats = nullptr);

}  // namespace dim3
