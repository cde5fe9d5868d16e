#pragma once
// Partial-result cache keyed by z: per-z benefit/space scoring, greedy
// population under a space budget, binary persistence, and the cached
// execution path that skips cached z columns and splices their decoded
// pairs into the result.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dim3/common.hpp"
#include "dim3/costmodel.hpp"
#include "dim3/engine.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

// Store no longer matches its inputs; callers fall back to the uncached path.
struct CacheInvalidError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One cached z column. size >= 1 stores the k partner ids directly;
// size <= 0 stores the complement (the x values NOT matching z) and
// k = x_card + size. Entries always have k >= 1, which keeps size == 0
// unambiguous: it can only mean a full column stored as an empty
// complement. |ids| == |size| either way.
struct CacheEntry {
  Code z = 0;
  std::int64_t size = 0;
  std::vector<Code> ids;

  std::uint64_t space_units() const { return 2 + ids.size(); }
};

struct CacheStore {
  std::uint64_t fingerprint = 0;
  Code x_card = 0;
  Code z_card = 0;
  std::vector<CacheEntry> entries;  // descending score order from populate

  std::uint64_t space_units() const {
    std::uint64_t s = 0;
    for (const auto& e : entries) s += e.space_units();
    return s;
  }
};

// Benefit per unit space: the operation cost the cached column avoids,
// divided by 2 + min(k, x_card - k) id slots.
double cache_score(std::uint64_t n_sparse, std::uint64_t n_simd,
                   std::uint64_t n_nonsimd, std::uint64_t k,
                   std::uint64_t x_card, const CostConstants& c);

// Complement-aware encoding of the partner set of one z. xs must be
// nonempty with values below x_card; ids come out ascending.
CacheEntry encode_entry(Code z, std::span<const Code> xs, Code x_card);
// Inverse: the k partner ids, ascending.
std::vector<Code> decode_entry(const CacheEntry& e, Code x_card);

// 64-bit content hash of both tables in caller order; any change invalidates.
std::uint64_t table_fingerprint(const RawTable& r, const RawTable& s);

// Greedy fill from an instrumented, materialized, uncached hybrid run:
// entries enter in descending score order until the next one would
// exceed budget_units (one unit = one id slot; each entry also pays 2).
CacheStore populate_cache(const JoinProjectOutput& run,
                          std::uint64_t budget_units,
                          std::uint64_t fingerprint, const CostConstants& c);

void save_cache(const CacheStore& store, const std::filesystem::path& path);
CacheStore load_cache(const std::filesystem::path& path);

// Cached execution: verifies the fingerprint, decodes entries, and runs the
// hybrid pipeline with cached z excluded from the partition. Throws
// CacheInvalidError on fingerprint mismatch.
JoinProjectOutput join_project_with_cache(const RawTable& r, const RawTable& s,
                                          const CacheStore& store,
                                          const EngineConfig& cfg,
                                          const CostConstants& c);

}  // namespace dim3
