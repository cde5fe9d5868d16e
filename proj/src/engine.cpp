#include "dim3/engine.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace dim3 {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt_double(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

SkipFlags resolve_skips(const RawTable& r, const RawTable& s,
                        const EngineConfig& cfg) {
  SkipFlags sk = cfg.natural_keys_declared;
  if (cfg.natural_keys_auto) {
    if (!sk.x) sk.x = detect_natural_keys(r.left);
    if (!sk.y)
      sk.y = detect_natural_keys(r.right) && detect_natural_keys(s.right);
    if (!sk.z) sk.z = detect_natural_keys(s.left);
  }
  return sk;
}

// Auto-detected skips are sampled and may miss an out-of-range value that
// the full scan inside map_tables then rejects; fall back to dictionaries
// for the columns the user did not pin.
MappingOutput map_with_fallback(const RawTable& r, const RawTable& s,
                                const EngineConfig& cfg, MemoryBudget* budget) {
  SkipFlags sk = resolve_skips(r, s, cfg);
  const SkipFlags& declared = cfg.natural_keys_declared;
  try {
    return map_tables(r, s, sk, cfg.mapping, budget);
  } catch (const ConfigError&) {
    if (sk.x == declared.x && sk.y == declared.y && sk.z == declared.z) throw;
    return map_tables(r, s, declared, cfg.mapping, budget);
  }
}

PartitionForce partition_force(Strategy s) {
  switch (s) {
    case Strategy::sparse_only:
      return PartitionForce::all_sparse;
    case Strategy::dense_only:
      return PartitionForce::all_dense;
    default:
      return PartitionForce::cost_based;
  }
}

// ---------------------------------------------------------------------------
// Aggregate cells. cnt always tracks group multiplicity; acc holds the
// running sum, min or max depending on the function.

struct Cell {
  double acc = 0;
  std::uint64_t cnt = 0;
};

void cell_init(Cell& c, AggFn a, double v) {
  c.acc = a == AggFn::count ? 0 : v;
  c.cnt = 1;
}

void cell_update(Cell& c, AggFn a, double v) {
  switch (a) {
    case AggFn::sum:
    case AggFn::avg:
      c.acc += v;
      break;
    case AggFn::min:
      c.acc = std::min(c.acc, v);
      break;
    case AggFn::max:
      c.acc = std::max(c.acc, v);
      break;
    case AggFn::count:
      break;
  }
  c.cnt++;
}

// Combination of pre-aggregated cells (count adds counts, avg adds both).
void cell_merge(Cell& dst, AggFn a, const Cell& src) {
  switch (a) {
    case AggFn::sum:
    case AggFn::avg:
      dst.acc += src.acc;
      break;
    case AggFn::min:
      dst.acc = std::min(dst.acc, src.acc);
      break;
    case AggFn::max:
      dst.acc = std::max(dst.acc, src.acc);
      break;
    case AggFn::count:
      break;
  }
  dst.cnt += src.cnt;
}

double cell_final(const Cell& c, AggFn a) {
  if (a == AggFn::count || a == AggFn::avg) {
    if (c.cnt > (1ull << 53))
      throw ResourceError("count aggregate exceeds exact integer range");
  }
  switch (a) {
    case AggFn::count:
      return static_cast<double>(c.cnt);
    case AggFn::avg:
      return c.acc / static_cast<double>(c.cnt);
    default:
      return c.acc;
  }
}

double combine_val(CombineFn f, double v, double u) {
  switch (f) {
    case CombineFn::multiply:
      return v * u;
    case CombineFn::add:
      return v + u;
    case CombineFn::abs_diff:
      return std::fabs(v - u);
    case CombineFn::left:
      return v;
    case CombineFn::right:
      return u;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Valued CSR: duplicates kept, one payload per entry. Counting sort by the
// major column, stable, so entries stay in input order within a row.

struct ValuedCsr {
  std::vector<std::uint64_t> row_ptr;
  std::vector<Code> col;
  std::vector<double> val;
  Code n_rows = 0;
};

ValuedCsr build_valued_csr(Code n_rows, std::span<const Code> major,
                           std::span<const Code> minor,
                           std::span<const double> vals, MemoryBudget* budget) {
  if (budget != nullptr)
    budget->charge((static_cast<std::uint64_t>(n_rows) + 1) * 16 +
                   major.size() * 12);
  ValuedCsr m;
  m.n_rows = n_rows;
  m.row_ptr.assign(static_cast<std::size_t>(n_rows) + 1, 0);
  for (Code a : major) m.row_ptr[a + 1]++;
  for (Code i = 0; i < n_rows; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
  m.col.resize(major.size());
  m.val.resize(major.size());
  std::vector<std::uint64_t> cursor(m.row_ptr.begin(), m.row_ptr.end() - 1);
  for (std::size_t i = 0; i < major.size(); ++i) {
    std::uint64_t pos = cursor[major[i]]++;
    m.col[pos] = minor[i];
    m.val[pos] = vals[i];
  }
  return m;
}

void copy_value(const ColumnData& src, std::size_t i, ColumnData* dst) {
  if (src.type == ColumnType::u64)
    dst->push_int(src.ints[i]);
  else
    dst->push_str(src.strs[i]);
}

template <typename K>
K key_at(const ColumnData& col, std::size_t i);
template <>
std::uint64_t key_at<std::uint64_t>(const ColumnData& col, std::size_t i) {
  return col.ints[i];
}
template <>
std::string_view key_at<std::string_view>(const ColumnData& col,
                                          std::size_t i) {
  return col.strs[i];
}

}  // namespace

// ---------------------------------------------------------------------------

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::auto_select:
      return "auto";
    case Strategy::classical:
      return "classical";
    case Strategy::hybrid:
      return "hybrid";
    case Strategy::sparse_only:
      return "sparse";
    case Strategy::dense_only:
      return "dense";
  }
  return "auto";
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
  if (name == "auto") return Strategy::auto_select;
  if (name == "classical") return Strategy::classical;
  if (name == "hybrid") return Strategy::hybrid;
  if (name == "sparse" || name == "sparse_only") return Strategy::sparse_only;
  if (name == "dense" || name == "dense_only") return Strategy::dense_only;
  return std::nullopt;
}

const char* agg_name(AggFn a) {
  switch (a) {
    case AggFn::sum:
      return "sum";
    case AggFn::count:
      return "count";
    case AggFn::min:
      return "min";
    case AggFn::max:
      return "max";
    case AggFn::avg:
      return "avg";
  }
  return "sum";
}

std::optional<AggFn> agg_from_name(std::string_view name) {
  if (name == "sum") return AggFn::sum;
  if (name == "count") return AggFn::count;
  if (name == "min") return AggFn::min;
  if (name == "max") return AggFn::max;
  if (name == "avg") return AggFn::avg;
  return std::nullopt;
}

const char* combine_name(CombineFn f) {
  switch (f) {
    case CombineFn::multiply:
      return "multiply";
    case CombineFn::add:
      return "add";
    case CombineFn::abs_diff:
      return "absdiff";
    case CombineFn::left:
      return "left";
    case CombineFn::right:
      return "right";
  }
  return "multiply";
}

std::optional<CombineFn> combine_from_name(std::string_view name) {
  if (name == "multiply" || name == "mul") return CombineFn::multiply;
  if (name == "add") return CombineFn::add;
  if (name == "absdiff" || name == "abs_diff") return CombineFn::abs_diff;
  if (name == "left") return CombineFn::left;
  if (name == "right") return CombineFn::right;
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> ExecutionReport::to_kv()
    const {
  std::vector<std::pair<std::string, std::string>> kv;
  auto add = [&](const char* k, std::string v) { kv.emplace_back(k, std::move(v)); };
  auto add_u = [&](const char* k, std::uint64_t v) { kv.emplace_back(k, std::to_string(v)); };
  add("strategy", strategy);
  add("swapped", swapped ? "true" : "false");
  add_u("r_rows", r_rows);
  add_u("s_rows", s_rows);
  add_u("out_j_estimate", out_j_estimate);
  add("f1", fmt_double(f1_value));
  add_u("out_p", out_p);
  add_u("pairs_classical", pairs_classical);
  add_u("pairs_sparse", pairs_sparse);
  add_u("pairs_dense", pairs_dense);
  add_u("pairs_cached", pairs_cached);
  add_u("sparse_z", sparse_z);
  add_u("dense_z", dense_z);
  add_u("cached_z", cached_z);
  add_u("f2_evaluations", f2_evaluations);
  add_u("dropped_r", dropped_r);
  add_u("intermediate_pairs", intermediate_pairs);
  add_u("x_card", x_card);
  add_u("y_card", y_card);
  add_u("z_card", z_card);
  add_u("panel_bytes", panel_bytes);
  add_u("peak_bytes", peak_bytes);
  add_u("spa_inner_count", spa.inner_count);
  add_u("spa_allocations", spa.spa_allocations);
  add_u("spa_entries", spa.spa_entries);
  add_u("dense_wide_encounters", dense.wide_encounters);
  add_u("dense_probe_encounters", dense.probe_encounters);
  add_u("dense_blocks_checked", dense.blocks_checked);
  add_u("dense_probes_done", dense.probes_done);
  add_u("dense_row_bitmaps_built", dense.row_bitmaps_built);
  add("ms_total", fmt_double(ms_total, "%.3f"));
  add("ms_estimate", fmt_double(ms_estimate, "%.3f"));
  add("ms_map", fmt_double(ms_map, "%.3f"));
  add("ms_csr", fmt_double(ms_csr, "%.3f"));
  add("ms_partition", fmt_double(ms_partition, "%.3f"));
  add("ms_sparse", fmt_double(ms_sparse, "%.3f"));
  add("ms_dense", fmt_double(ms_dense, "%.3f"));
  add("ms_classical", fmt_double(ms_classical, "%.3f"));
  add("ms_decode", fmt_double(ms_decode, "%.3f"));
  return kv;
}

const Dictionary* JoinProjectOutput::x_dict() const {
  if (!mapping) return nullptr;
  return report.swapped ? &mapping->dict_z : &mapping->dict_x;
}

const Dictionary* JoinProjectOutput::z_dict() const {
  if (!mapping) return nullptr;
  return report.swapped ? &mapping->dict_x : &mapping->dict_z;
}

const Dictionary* AggregateResult::x_dict() const {
  return mapping ? &mapping->dict_x : nullptr;
}

const Dictionary* AggregateResult::z_dict() const {
  return mapping ? &mapping->dict_z : nullptr;
}

bool engine_will_swap(const RawTable& r, const RawTable& s) {
  return s.size() > r.size();
}

JoinProjectOutput join_project(const RawTable& r, const RawTable& s,
                               const EngineConfig& cfg,
                               const CostConstants& c) {
  return join_project_extended(r, s, cfg, c, nullptr);
}

JoinProjectOutput join_project_extended(const RawTable& r, const RawTable& s,
                                        const EngineConfig& cfg,
                                        const CostConstants& c,
                                        const HybridExtras* extras) {
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  auto t_total = Clock::now();
  JoinProjectOutput out;
  ExecutionReport& rep = out.report;
  MemoryBudget budget(cfg.memory_budget_bytes);

  bool swapped = engine_will_swap(r, s);
  const RawTable& R = swapped ? s : r;
  const RawTable& S = swapped ? r : s;
  rep.swapped = swapped;
  rep.r_rows = R.size();
  rep.s_rows = S.size();

  auto t0 = Clock::now();
  rep.out_j_estimate = estimate_out_j_raw(R, S);
  rep.f1_value = f1(R.size(), S.size(), rep.out_j_estimate, c);
  rep.ms_estimate = ms_since(t0);

  Strategy chosen;
  switch (cfg.force) {
    case Strategy::auto_select:
      chosen = rep.f1_value > 0 ? Strategy::classical : Strategy::hybrid;
      break;
    case Strategy::classical:
      chosen = Strategy::classical;
      break;
    default:
      chosen = Strategy::hybrid;
      break;
  }

  if (chosen == Strategy::classical) {
    rep.strategy = "classical";
    t0 = Clock::now();
    ClassicalStats cs;
    out.result = hash_join_dedup(R, S, cfg.count_only, &budget, &cs);
    rep.ms_classical = ms_since(t0);
    rep.intermediate_pairs = cs.intermediate_pairs;
    rep.pairs_classical = out.result.count;
    // Pairs came out as (R.left, S.left); restore the caller's orientation.
    if (swapped) std::swap(out.result.raw_x, out.result.raw_z);
  } else {
    rep.strategy = cfg.force == Strategy::sparse_only  ? "sparse"
                   : cfg.force == Strategy::dense_only ? "dense"
                                                       : "hybrid";
    t0 = Clock::now();
    out.mapping = map_with_fallback(R, S, cfg, &budget);
    MappingOutput& m = *out.mapping;
    budget.charge(m.bytes());
    rep.ms_map = ms_since(t0);
    rep.dropped_r = m.dropped_r;
    rep.x_card = m.r.a_card;
    rep.y_card = m.s.b_card;
    rep.z_card = m.s.a_card;

    t0 = Clock::now();
    CsrMatrix r_by_x = build_csr(m.r, /*major_is_a=*/true, &budget);
    budget.charge(r_by_x.bytes());
    CsrMatrix s_by_z = build_csr(m.s, /*major_is_a=*/true, &budget);
    budget.charge(s_by_z.bytes());
    DegreeStats stats = compute_degree_stats(r_by_x, s_by_z);
    rep.ms_csr = ms_since(t0);

    if (extras != nullptr && extras->exclude_z != nullptr &&
        extras->exclude_z->size() != m.s.a_card)
      throw ConfigError(
          "exclusion vector does not match the z code space; was the cache "
          "built under a different mapping configuration?");

    t0 = Clock::now();
    PartitionResult part = partition_s_csr(
        s_by_z, stats, c, partition_force(cfg.force),
        extras != nullptr ? extras->exclude_z : nullptr, &budget);
    rep.ms_partition = ms_since(t0);
    rep.sparse_z = part.sparse_z_count;
    rep.dense_z = part.dense_z_count;
    rep.f2_evaluations = part.f2_evaluations;
    rep.panel_bytes = part.panel.bytes();

    Code z_card = m.s.a_card;
    ZCostStats zs;
    SparseOptions so;
    so.threads = cfg.threads;
    so.budget = &budget;
    DenseOptions dopt;
    dopt.threads = cfg.threads;
    dopt.mode = cfg.dense_mode;
    dopt.budget = &budget;
    if (cfg.collect_cache_stats) {
      zs.n_sparse.assign(z_card, 0);
      zs.n_simd.assign(z_card, 0);
      zs.n_nonsimd.assign(z_card, 0);
      zs.k.assign(z_card, 0);
      so.z_checks = &zs.n_sparse;
      so.z_results = &zs.k;
      dopt.z_wide_checks = &zs.n_simd;
      dopt.z_probe_checks = &zs.n_nonsimd;
      dopt.z_results = &zs.k;
    }

    std::vector<std::pair<Code, Code>> pairs;
    std::uint64_t prepended = 0;
    if (extras != nullptr && extras->prepend_pairs != nullptr) {
      prepended = extras->prepend_pairs->size();
      if (!cfg.count_only) {
        budget.charge(prepended * sizeof(std::pair<Code, Code>));
        // Copy-assign would pin capacity at exactly the seed size, so the
        // first kernel append past it copies the whole buffer at an
        // unamortized point. Start on the doubling schedule instead.
        pairs.reserve(std::bit_ceil(prepended + 1));
        pairs.insert(pairs.end(), extras->prepend_pairs->begin(),
                     extras->prepend_pairs->end());
      }
    }
    rep.pairs_cached = prepended;
    rep.cached_z = extras != nullptr ? extras->cached_z : 0;

    t0 = Clock::now();
    rep.pairs_sparse =
        sparse_bmm(r_by_x, part.s_sparse_by_y, z_card, so,
                   cfg.count_only ? nullptr : &pairs, &rep.spa);
    rep.ms_sparse = ms_since(t0);

    t0 = Clock::now();
    rep.pairs_dense = dense_ec(r_by_x, part.panel, c, dopt,
                               cfg.count_only ? nullptr : &pairs, &rep.dense);
    rep.ms_dense = ms_since(t0);

    out.result.provenance = ResultSet::Provenance::mapped;
    out.result.materialized = !cfg.count_only;
    out.result.count = prepended + rep.pairs_sparse + rep.pairs_dense;
    if (!cfg.count_only) {
      if (swapped)
        for (auto& p : pairs) std::swap(p.first, p.second);
      out.result.code_pairs = std::move(pairs);
    }
    if (cfg.collect_cache_stats) out.z_stats = std::move(zs);
  }

  rep.out_p = out.result.count;
  rep.peak_bytes = budget.peak();
  rep.ms_total = ms_since(t_total);
  return out;
}

namespace {

ResultSet decode_result(const ResultSet& in, const Dictionary* dx,
                        const Dictionary* dz) {
  if (in.provenance == ResultSet::Provenance::raw) return in;
  ResultSet res;
  res.provenance = ResultSet::Provenance::raw;
  res.materialized = in.materialized;
  res.count = in.count;
  res.raw_x.type = dx->value_type();
  res.raw_z.type = dz->value_type();
  if (!res.materialized) return res;
  for (auto [xc, zc] : in.code_pairs) {
    if (dx->value_type() == ColumnType::u64)
      res.raw_x.push_int(dx->int_value(xc));
    else
      res.raw_x.push_str(std::string(dx->bytes_value(xc)));
    if (dz->value_type() == ColumnType::u64)
      res.raw_z.push_int(dz->int_value(zc));
    else
      res.raw_z.push_str(std::string(dz->bytes_value(zc)));
  }
  return res;
}

}  // namespace

ResultSet result_to_raw(const JoinProjectOutput& out) {
  return decode_result(out.result, out.x_dict(), out.z_dict());
}

ResultSet aggregate_to_raw(const AggregateResult& out) {
  return decode_result(out.base, out.x_dict(), out.z_dict());
}

// ---------------------------------------------------------------------------

AggregateResult join_aggregate_both(const ValuedTable& r, const ValuedTable& s,
                                    CombineFn combine, AggFn agg,
                                    const EngineConfig& cfg,
                                    const CostConstants& c) {
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.force == Strategy::classical)
    throw ConfigError("join-aggregate always runs the mapped pipeline");
  if (r.values.size() != r.base.size() || s.values.size() != s.base.size())
    throw ConfigError("value column length does not match table length");
  auto t_total = Clock::now();
  AggregateResult out;
  ExecutionReport& rep = out.report;
  rep.strategy = "hybrid";
  rep.r_rows = r.size();
  rep.s_rows = s.size();
  MemoryBudget budget(cfg.memory_budget_bytes);

  auto t0 = Clock::now();
  out.mapping = map_with_fallback(r.base, s.base, cfg, &budget);
  MappingOutput& m = *out.mapping;
  budget.charge(m.bytes());
  rep.ms_map = ms_since(t0);
  rep.dropped_r = m.dropped_r;
  rep.x_card = m.r.a_card;
  rep.y_card = m.s.b_card;
  rep.z_card = m.s.a_card;

  // Collapsed matrices drive the per-z density decision only; the valued
  // structures below keep duplicates because every match feeds the aggregate.
  t0 = Clock::now();
  CsrMatrix r_by_x = build_csr(m.r, /*major_is_a=*/true, &budget);
  budget.charge(r_by_x.bytes());
  CsrMatrix s_by_z = build_csr(m.s, /*major_is_a=*/true, &budget);
  budget.charge(s_by_z.bytes());
  DegreeStats stats = compute_degree_stats(r_by_x, s_by_z);
  rep.out_j_estimate = stats.out_j.value;
  rep.ms_csr = ms_since(t0);

  t0 = Clock::now();
  Code z_card = m.s.a_card;
  Code y_card = m.s.b_card;
  PartitionForce pf = partition_force(cfg.force);
  F2Evaluator ev(stats, c);
  std::vector<bool> dense(z_card, false);
  Code n_dense = 0, n_sparse = 0;
  for (Code z = 0; z < z_card; ++z) {
    if (stats.m_z[z] == 0) continue;
    bool d = pf == PartitionForce::all_dense
                 ? true
                 : (pf == PartitionForce::all_sparse ? false : ev.score(z) > 0);
    dense[z] = d;
    if (d)
      ++n_dense;
    else
      ++n_sparse;
  }
  rep.f2_evaluations = ev.evaluations();
  rep.dense_z = n_dense;
  rep.sparse_z = n_sparse;

  // R values realigned to the surviving rows.
  std::vector<double> r_vals(m.r.size());
  for (std::size_t i = 0; i < m.r.size(); ++i)
    r_vals[i] = r.values[m.r_kept.empty() ? i : m.r_kept[i]];
  ValuedCsr r_vx = build_valued_csr(m.r.a_card, m.r.a, m.r.b, r_vals, &budget);
  r_vals.clear();
  r_vals.shrink_to_fit();

  // S splits by the per-z decision; dense columns compact to panel indices.
  std::vector<Code> dense_ids;
  std::vector<Code> dense_idx(z_card, 0);
  for (Code z = 0; z < z_card; ++z)
    if (dense[z]) {
      dense_idx[z] = static_cast<Code>(dense_ids.size());
      dense_ids.push_back(z);
    }
  std::vector<Code> sp_y, sp_z, dn_y, dn_j;
  std::vector<double> sp_v, dn_v;
  for (std::size_t i = 0; i < m.s.size(); ++i) {
    Code z = m.s.a[i];
    if (dense[z]) {
      dn_y.push_back(m.s.b[i]);
      dn_j.push_back(dense_idx[z]);
      dn_v.push_back(s.values[i]);
    } else {
      sp_y.push_back(m.s.b[i]);
      sp_z.push_back(m.s.a[i]);
      sp_v.push_back(s.values[i]);
    }
  }
  ValuedCsr s_sp = build_valued_csr(y_card, sp_y, sp_z, sp_v, &budget);
  ValuedCsr s_dn = build_valued_csr(y_card, dn_y, dn_j, dn_v, &budget);
  sp_y = sp_z = dn_y = dn_j = {};
  sp_v = dn_v = {};
  rep.ms_partition = ms_since(t0);

  std::vector<std::pair<Code, Code>> pairs;
  std::vector<double> values;
  std::uint64_t emitted_sparse = 0, emitted_dense = 0;

  // Sparse pass: stamp-guarded accumulator keyed by global z, first-encounter
  // emission per x.
  t0 = Clock::now();
  {
    BudgetCharge spa_charge(&budget, static_cast<std::uint64_t>(z_card) * 24);
    std::vector<std::int64_t> stamp(z_card, -1);
    std::vector<Cell> cell(z_card);
    std::vector<Code> touched;
    for (Code x = 0; x < r_vx.n_rows; ++x) {
      for (std::uint64_t e = r_vx.row_ptr[x]; e < r_vx.row_ptr[x + 1]; ++e) {
        Code y = r_vx.col[e];
        double v = r_vx.val[e];
        for (std::uint64_t f = s_sp.row_ptr[y]; f < s_sp.row_ptr[y + 1]; ++f) {
          Code z = s_sp.col[f];
          double cv = combine_val(combine, v, s_sp.val[f]);
          if (stamp[z] != static_cast<std::int64_t>(x)) {
            stamp[z] = static_cast<std::int64_t>(x);
            cell_init(cell[z], agg, cv);
            touched.push_back(z);
          } else {
            cell_update(cell[z], agg, cv);
          }
        }
      }
      emitted_sparse += touched.size();
      if (!cfg.count_only)
        for (Code z : touched) {
          pairs.emplace_back(x, z);
          values.push_back(cell_final(cell[z], agg));
        }
      else
        for (Code z : touched) cell_final(cell[z], agg);
      touched.clear();
    }
  }
  rep.pairs_sparse = emitted_sparse;
  rep.ms_sparse = ms_since(t0);

  // Dense pass: plain accumulator row over the dense columns, swept and
  // reset per x. Occupancy is cnt > 0.
  t0 = Clock::now();
  {
    BudgetCharge row_charge(&budget, dense_ids.size() * 16);
    std::vector<Cell> row(dense_ids.size());
    for (Code x = 0; x < r_vx.n_rows; ++x) {
      std::uint64_t hits = 0;
      for (std::uint64_t e = r_vx.row_ptr[x]; e < r_vx.row_ptr[x + 1]; ++e) {
        Code y = r_vx.col[e];
        double v = r_vx.val[e];
        for (std::uint64_t f = s_dn.row_ptr[y]; f < s_dn.row_ptr[y + 1]; ++f) {
          Code j = s_dn.col[f];
          double cv = combine_val(combine, v, s_dn.val[f]);
          if (row[j].cnt == 0)
            cell_init(row[j], agg, cv);
          else
            cell_update(row[j], agg, cv);
          ++hits;
        }
      }
      if (hits == 0) continue;
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j].cnt == 0) continue;
        ++emitted_dense;
        if (!cfg.count_only) {
          pairs.emplace_back(x, dense_ids[j]);
          values.push_back(cell_final(row[j], agg));
        } else {
          cell_final(row[j], agg);
        }
        row[j] = Cell{};
      }
    }
  }
  rep.pairs_dense = emitted_dense;
  rep.ms_dense = ms_since(t0);

  out.base.provenance = ResultSet::Provenance::mapped;
  out.base.materialized = !cfg.count_only;
  out.base.count = emitted_sparse + emitted_dense;
  out.base.code_pairs = std::move(pairs);
  out.values = std::move(values);
  rep.out_p = out.base.count;
  rep.peak_bytes = budget.peak();
  rep.ms_total = ms_since(t_total);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename YKey, typename XKey>
void aggregate_one_typed(const RawTable& r, const RawTable& s, AggFn agg,
                         MemoryBudget* budget, GroupByResult* out) {
  BudgetCharge scratch(budget, s.size() * 40 + r.size() * 24 + 64);
  bool need_value = agg != AggFn::count;

  // Pre-aggregate S by y: one cell per distinct y.
  std::unordered_map<YKey, Cell> sg;
  sg.reserve(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    double v = need_value ? static_cast<double>(s.left.ints[j]) : 0.0;
    auto [it, fresh] = sg.try_emplace(key_at<YKey>(s.right, j));
    if (fresh)
      cell_init(it->second, agg, v);
    else
      cell_update(it->second, agg, v);
  }

  // Classical probe with per-x combination of the pre-aggregates.
  std::unordered_map<XKey, std::size_t> xmap;
  std::vector<Cell> cells;
  std::vector<std::size_t> first_row;
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto it = sg.find(key_at<YKey>(r.right, i));
    if (it == sg.end()) continue;
    auto [xit, fresh] = xmap.try_emplace(key_at<XKey>(r.left, i), cells.size());
    if (fresh) {
      cells.push_back(it->second);
      first_row.push_back(i);
    } else {
      cell_merge(cells[xit->second], agg, it->second);
    }
  }

  out->keys.type = r.left.type;
  out->values.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    copy_value(r.left, first_row[i], &out->keys);
    out->values.push_back(cell_final(cells[i], agg));
  }
}

template <typename YKey>
void aggregate_one_dispatch_x(const RawTable& r, const RawTable& s, AggFn agg,
                              MemoryBudget* budget, GroupByResult* out) {
  if (r.left.type == ColumnType::u64)
    aggregate_one_typed<YKey, std::uint64_t>(r, s, agg, budget, out);
  else
    aggregate_one_typed<YKey, std::string_view>(r, s, agg, budget, out);
}

}  // namespace

GroupByResult join_aggregate_one(const RawTable& r, const RawTable& s,
                                 AggFn agg, const EngineConfig& cfg,
                                 const CostConstants& c) {
  (void)c;
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (agg != AggFn::count && s.left.type != ColumnType::u64)
    throw ConfigError("aggregate over a non-numeric z column");
  auto t_total = Clock::now();
  GroupByResult out;
  ExecutionReport& rep = out.report;
  rep.strategy = "classical";
  rep.r_rows = r.size();
  rep.s_rows = s.size();
  MemoryBudget budget(cfg.memory_budget_bytes);

  out.keys.type = r.left.type;
  if (r.size() > 0 && s.size() > 0 && r.right.type == s.right.type) {
    if (r.right.type == ColumnType::u64)
      aggregate_one_dispatch_x<std::uint64_t>(r, s, agg, &budget, &out);
    else
      aggregate_one_dispatch_x<std::string_view>(r, s, agg, &budget, &out);
  }
  rep.out_p = out.keys.size();
  rep.peak_bytes = budget.peak();
  rep.ms_total = ms_since(t_total);
  return out;
}

}  // namespace dim3
