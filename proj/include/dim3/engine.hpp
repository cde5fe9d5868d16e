#pragma once
// Orchestration: the classical-vs-hybrid gate on the estimated join size,
// dictionary mapping, S partition, the two kernels, and the join-aggregate
// variants. Owns the per-query memory budget and the execution report.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dim3/classical.hpp"
#include "dim3/common.hpp"
#include "dim3/costmodel.hpp"
#include "dim3/denseec.hpp"
#include "dim3/mapping.hpp"
#include "dim3/partition.hpp"
#include "dim3/relation.hpp"
#include "dim3/sparsebmm.hpp"

namespace dim3 {

enum class Strategy : std::uint8_t {
  auto_select,
  classical,
  hybrid,
  sparse_only,  // hybrid with every z on the sparse side
  dense_only,   // hybrid with every z on the dense panel
};

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view name);

struct EngineConfig {
  Strategy force = Strategy::auto_select;
  int threads = 1;
  std::uint64_t memory_budget_bytes = 3ull << 30;
  bool count_only = false;
  bool collect_cache_stats = false;  // per-z op counters, hybrid path only
  DensePathMode dense_mode = DensePathMode::cost_based;
  MappingConfig mapping;
  // Column code skipping: declared flags force identity codes; auto probes
  // integer columns with the sampled density heuristic.
  bool natural_keys_auto = true;
  SkipFlags natural_keys_declared;
};

// Per-z operation counts from an instrumented hybrid run, the inputs to
// cache scoring. Vectors are indexed by z code (engine orientation).
struct ZCostStats {
  std::vector<std::uint64_t> n_sparse;   // inner-loop hits in the sparse kernel
  std::vector<std::uint64_t> n_simd;     // wide blocks examined in the dense kernel
  std::vector<std::uint64_t> n_nonsimd;  // scalar probes in the dense kernel
  std::vector<std::uint64_t> k;          // emitted pairs per z
};

struct ExecutionReport {
  std::string strategy;  // path taken: "classical" or "hybrid"
  bool swapped = false;  // inputs exchanged so the build side is smaller
  std::uint64_t r_rows = 0, s_rows = 0;
  std::uint64_t out_j_estimate = 0;
  double f1_value = 0;
  std::uint64_t out_p = 0;
  std::uint64_t pairs_classical = 0;
  std::uint64_t pairs_sparse = 0;
  std::uint64_t pairs_dense = 0;
  std::uint64_t pairs_cached = 0;  // decoded from a cache store
  std::uint64_t sparse_z = 0, dense_z = 0, cached_z = 0;
  std::uint64_t f2_evaluations = 0;
  std::uint64_t dropped_r = 0;
  std::uint64_t intermediate_pairs = 0;  // classical path: pre-dedup join size
  std::uint64_t x_card = 0, y_card = 0, z_card = 0;
  std::uint64_t panel_bytes = 0;
  std::uint64_t peak_bytes = 0;
  SpaStats spa;
  DenseEcStats dense;
  double ms_total = 0, ms_estimate = 0, ms_map = 0, ms_csr = 0;
  double ms_partition = 0, ms_sparse = 0, ms_dense = 0, ms_classical = 0;
  double ms_decode = 0;

  // Flat key=value view, insertion-ordered, for text and JSON serialization.
  std::vector<std::pair<std::string, std::string>> to_kv() const;
};

struct JoinProjectOutput {
  ResultSet result;
  ExecutionReport report;
  // Present on hybrid runs; codes in result.code_pairs decode through these.
  std::optional<MappingOutput> mapping;
  std::optional<ZCostStats> z_stats;

  // Dictionaries for the caller's (x, z) orientation, null on raw results.
  const Dictionary* x_dict() const;
  const Dictionary* z_dict() const;
};

// True when join_project will run with the inputs exchanged (s larger than r).
bool engine_will_swap(const RawTable& r, const RawTable& s);

JoinProjectOutput join_project(const RawTable& r, const RawTable& s,
                               const EngineConfig& cfg, const CostConstants& c);

// Hybrid-path extension points for the cache layer. Codes are in engine
// orientation (post-swap). exclude_z drops columns from the partition;
// prepend_emit appends exactly prepend_count decoded cache hits ahead of
// kernel output, writing straight into the result buffer so the hits are
// never staged in a scratch vector.
struct HybridExtras {
  const std::vector<bool>* exclude_z = nullptr;
  std::uint64_t prepend_count = 0;
  std::function<void(std::vector<std::pair<Code, Code>>&)> prepend_emit;
  std::uint64_t cached_z = 0;
};

JoinProjectOutput join_project_extended(const RawTable& r, const RawTable& s,
                                        const EngineConfig& cfg,
                                        const CostConstants& c,
                                        const HybridExtras* extras);

// Decodes a mapped result into raw values; raw results pass through.
ResultSet result_to_raw(const JoinProjectOutput& out);

// ---------------------------------------------------------------------------
// Join-aggregate. Aggregates run in caller orientation (no swap).

enum class AggFn : std::uint8_t { sum, count, min, max, avg };
enum class CombineFn : std::uint8_t { multiply, add, abs_diff, left, right };

const char* agg_name(AggFn a);
std::optional<AggFn> agg_from_name(std::string_view name);
const char* combine_name(CombineFn f);
std::optional<CombineFn> combine_from_name(std::string_view name);

// One row per distinct (x, z): the aggregate of combine(r.value, s.value)
// over all matching y. pairs/raw columns follow ResultSet conventions;
// values[i] belongs to pair i.
struct AggregateResult {
  ResultSet base;
  std::vector<double> values;
  ExecutionReport report;
  std::optional<MappingOutput> mapping;
  const Dictionary* x_dict() const;
  const Dictionary* z_dict() const;
};

AggregateResult join_aggregate_both(const ValuedTable& r, const ValuedTable& s,
                                    CombineFn combine, AggFn agg,
                                    const EngineConfig& cfg,
                                    const CostConstants& c);

// Decodes the aggregate's (x, z) pairs into raw values; values[] is shared.
ResultSet aggregate_to_raw(const AggregateResult& out);

// Group-by x of agg over S.z across the join, via the pre-aggregation
// rewrite: S collapses to one row per y first, then a classical join and a
// per-x combination step.
struct GroupByResult {
  ColumnData keys;  // distinct x, first-encounter order
  std::vector<double> values;
  ExecutionReport report;
};

GroupByResult join_aggregate_one(const RawTable& r, const RawTable& s,
                                 AggFn agg, const EngineConfig& cfg,
                                 const CostConstants& c);

}  // namespace dim3
