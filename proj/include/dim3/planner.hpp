#pragma once
// Dynamic program placing duplicate-eliminating projections in a left-deep
// join chain R_1(x_1,x_2) join R_2(x_2,x_3) join ... with final projection
// onto (x_1, x_{k+1}). A dedup at join i shrinks every later intermediate by
// the ratio out_p[i] / out_j[i].

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dim3/costmodel.hpp"
#include "dim3/engine.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

// Cardinalities are 1-based: index 0 is unused padding. out_j[i] / out_p[i]
// describe join i (the join that adds table i), defined for i in [2, k];
// index 1 mirrors sizes[1] (a lone table is its own dedup'd result).
struct ChainSpec {
  int k = 0;
  std::vector<double> sizes;
  std::vector<double> out_j;
  std::vector<double> out_p;
};

// Throws ConfigError when sizes are missing, nonpositive, or out_p > out_j.
void validate_chain_spec(const ChainSpec& spec);

struct ChainPlan {
  std::vector<int> dedup_positions;  // ascending, subset of [2, k], k always in
  double est_cost = 0;
};

// Cost of one placement set under the shared model: joins between dedup
// positions cost (left + table + output) hash operations; a dedup'd join
// costs the cheaper of the classical and mapped formulations.
double plan_cost(const ChainSpec& spec, const std::vector<int>& positions,
                 const CostConstants& c);

ChainPlan dp_plan(const ChainSpec& spec, const CostConstants& c);
ChainPlan eager_plan(const ChainSpec& spec, const CostConstants& c);
ChainPlan lazy_plan(const ChainSpec& spec, const CostConstants& c);

enum class PlanKind : std::uint8_t { dp, eager, lazy };
ChainPlan make_plan(const ChainSpec& spec, PlanKind kind,
                    const CostConstants& c);

// Left-deep execution over u64 tables. Intermediates carry (x_1, frontier)
// pairs with duplicates; at each planned position the running bag goes
// through the adaptive join-project instead of a plain join.
struct ChainExecution {
  ResultSet result;
  ChainPlan plan;
  std::vector<std::uint64_t> join_out;  // measured pre-dedup size per join, [2,k]
  double ms_total = 0;
};

ChainExecution execute_plan(const std::vector<RawTable>& tables,
                            const ChainPlan& plan, const EngineConfig& cfg,
                            const CostConstants& c);

// Exact chain statistics by multiplicity-tracking evaluation, for manifests
// without overrides. Feasible at test scale only.
ChainSpec chain_spec_from_tables(const std::vector<RawTable>& tables);

// Text manifest: `table=<path>` per table in chain order, then optional
// `out_j=v2,...,vk` / `out_p=v2,...,vk` overrides (both or neither).
struct ChainManifest {
  std::vector<std::filesystem::path> tables;
  std::vector<double> out_j;  // empty unless overridden
  std::vector<double> out_p;
};

ChainManifest load_manifest(const std::filesystem::path& path);

}  // namespace dim3
