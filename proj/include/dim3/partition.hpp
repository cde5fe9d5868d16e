#pragma once
// Intersection-free partition of S by z column: f2 > 0 sends a column to the
// dense bitmap panel, the rest stay in a y-major sparse remainder. Every z
// lands in exactly one side, so kernel outputs concatenate without dedup.

#include <cstdint>
#include <vector>

#include "dim3/bitmap.hpp"
#include "dim3/costmodel.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

enum class PartitionForce : std::uint8_t { cost_based, all_sparse, all_dense };

struct PartitionResult {
  CsrMatrix s_sparse_by_y;  // sparse-z tuples keyed by y, cols are z
  BitmapPanel panel;
  std::uint64_t f2_evaluations = 0;
  std::uint64_t sparse_z_count = 0;
  std::uint64_t dense_z_count = 0;
};

// From the z-major CSR of S. exclude (optional, |Z| flags) removes columns
// from both sides; the cache path uses it for already-cached z.
PartitionResult partition_s_csr(const CsrMatrix& s_by_z, const DegreeStats& stats,
                                const CostConstants& c,
                                PartitionForce force = PartitionForce::cost_based,
                                const std::vector<bool>* exclude = nullptr,
                                MemoryBudget* budget = nullptr);

// Convenience form from the mapped table.
PartitionResult partition_s(const MappedTable& s, const DegreeStats& stats,
                            const CostConstants& c,
                            PartitionForce force = PartitionForce::cost_based,
                            MemoryBudget* budget = nullptr);

}  // namespace dim3
