// Command-line surface: calibration, data generation, join-project runs,
// join-aggregates, benchmark sweeps, and chain planning.
// Exit codes: 0 success, 2 usage/parameter, 3 I/O or format, 4 resource.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dim3/cache.hpp"
#include "dim3/costmodel.hpp"
#include "dim3/datagen.hpp"
#include "dim3/engine.hpp"
#include "dim3/planner.hpp"
#include "dim3/relation.hpp"

namespace {

using namespace dim3;
using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

CostConstants resolve_constants(const std::string& flag_path) {
  std::string p = flag_path;
  if (p.empty()) {
    const char* env = std::getenv("DIM3_CONSTS");
    if (env) p = env;
  }
  if (p.empty())
    throw ConfigError(
        "no cost constants: pass --consts, set DIM3_CONSTS, or run "
        "`dim3 calibrate -o <file>` first");
  return load_constants(p);
}

FileFormat parse_format(const std::string& s) {
  if (s == "auto") return FileFormat::auto_detect;
  if (s == "tsv") return FileFormat::tsv;
  if (s == "csv") return FileFormat::csv;
  if (s == "binary" || s == "bin") return FileFormat::binary;
  throw ConfigError("unknown format '" + s + "' (auto|tsv|csv|binary)");
}

Strategy parse_strategy(const std::string& s) {
  auto st = strategy_from_name(s);
  if (!st)
    throw ConfigError("unknown strategy '" + s +
                      "' (auto|classical|hybrid|sparse|dense)");
  return *st;
}

// Values that parse fully as numbers become JSON numbers.
json kv_to_json(const std::vector<std::pair<std::string, std::string>>& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv) {
    char* end = nullptr;
    double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() + v.size() && !v.empty() && std::isfinite(d)) {
      double ip = 0;
      if (std::modf(d, &ip) == 0.0 && std::fabs(d) < 9e15)
        j[k] = static_cast<std::int64_t>(d);
      else
        j[k] = d;
    } else {
      j[k] = v;
    }
  }
  return j;
}

void print_report(const ExecutionReport& rep, bool json_mode,
                  std::uint64_t count, std::ostream& os) {
  auto kv = rep.to_kv();
  if (json_mode) {
    json j = kv_to_json(kv);
    j["count"] = count;
    os << j.dump(2) << "\n";
  } else {
    os << count << "\n";
    for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  }
}

void write_report_file(const ExecutionReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& [k, v] : rep.to_kv()) out << k << "=" << v << "\n";
}

void print_constants(const CostConstants& c) {
  auto emit = [](const char* key, double v) {
    std::printf("%s=%.17g\n", key, v);
  };
  std::printf("version=1\n");
  emit("t_seqR", c.t_seqR);
  emit("t_randR", c.t_randR);
  emit("t_randRW", c.t_randRW);
  emit("t_hash", c.t_hash);
  emit("t_map", c.t_map);
  emit("t_ECs", c.t_ECs);
  emit("t_ECd", c.t_ECd);
  std::printf("W=%u\n", c.w);
}

// ---------------------------------------------------------------------------
// generate

struct GenOpts {
  std::uint64_t rows = 0;
  std::uint64_t max = 1;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "auto";
  double alpha = 1.0;
  std::string zipf_cols = "both";
  int log2_n = 10;
  std::uint64_t edges = 0;
  double pa = 0.57, pb = 0.19, pc = 0.19, pd = 0.05;
};

ZipfColumns parse_zipf_cols(const std::string& s) {
  if (s == "both") return ZipfColumns::both;
  if (s == "left") return ZipfColumns::left;
  if (s == "right") return ZipfColumns::right;
  throw ConfigError("unknown --zipf-cols '" + s + "' (both|left|right)");
}

int run_generate(const std::string& kind, const GenOpts& g) {
  RawTable t;
  if (kind == "uniform") {
    t = gen_uniform(g.rows, g.max, g.seed);
  } else if (kind == "zipf") {
    t = gen_zipf(g.rows, g.max, g.alpha, parse_zipf_cols(g.zipf_cols), g.seed);
  } else {
    t = gen_rmat(g.log2_n, g.edges, g.pa, g.pb, g.pc, g.pd, g.seed);
  }
  save_table(t, g.out, parse_format(g.format));
  std::printf("wrote %zu rows to %s\n", t.size(), g.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// join-project

struct JoinOpts {
  std::string r_path, s_path;
  std::string consts;
  std::string force = "auto";
  int threads = 1;
  std::string out;
  std::string report_path;
  std::string format = "auto";
  bool header = false;
  bool json_mode = false;
  bool count_only = true;
  std::string cache_store;
  std::uint64_t cache_budget = 0;
  bool cache_populate = false;
};

int run_join_project(const JoinOpts& o) {
  CostConstants c = resolve_constants(o.consts);
  LoadOptions lo;
  lo.format = parse_format(o.format);
  lo.skip_header = o.header;
  RawTable r = load_table(o.r_path, lo);
  RawTable s = load_table(o.s_path, lo);

  EngineConfig cfg;
  cfg.force = parse_strategy(o.force);
  cfg.threads = o.threads;
  cfg.count_only = o.out.empty();

  JoinProjectOutput jp;
  if (o.cache_populate) {
    if (o.cache_store.empty())
      throw ConfigError("--cache-populate needs --cache-store");
    if (o.cache_budget == 0)
      throw ConfigError("--cache-populate needs a nonzero --cache-budget");
    if (cfg.force == Strategy::auto_select) cfg.force = Strategy::hybrid;
    if (cfg.force == Strategy::classical)
      throw ConfigError("cache population needs the mapped pipeline");
    cfg.collect_cache_stats = true;
    cfg.count_only = false;
    jp = join_project(r, s, cfg, c);
    CacheStore store =
        populate_cache(jp, o.cache_budget, table_fingerprint(r, s), c);
    save_cache(store, o.cache_store);
    std::fprintf(stderr, "cached %zu z columns (%llu units)\n",
                 store.entries.size(),
                 static_cast<unsigned long long>(store.space_units()));
  } else if (!o.cache_store.empty()) {
    CacheStore store = load_cache(o.cache_store);
    jp = join_project_with_cache(r, s, store, cfg, c);
  } else {
    jp = join_project(r, s, cfg, c);
  }

  if (!o.out.empty()) {
    ResultSet raw = result_to_raw(jp);
    RawTable pairs;
    pairs.left = std::move(raw.raw_x);
    pairs.right = std::move(raw.raw_z);
    save_table(pairs, o.out, FileFormat::auto_detect);
  }
  if (!o.report_path.empty()) write_report_file(jp.report, o.report_path);
  print_report(jp.report, o.json_mode, jp.result.count, std::cout);
  return 0;
}

// ---------------------------------------------------------------------------
// aggregate

struct AggOpts {
  std::string r_path, s_path;
  std::string consts;
  std::string mode = "both";
  std::string agg;
  std::string combine = "multiply";
  int threads = 1;
  std::string format = "auto";
  bool header = false;
  bool json_mode = false;
  std::string out;
};

int run_aggregate(const AggOpts& o) {
  CostConstants c = resolve_constants(o.consts);
  auto agg = agg_from_name(o.agg);
  if (!agg)
    throw ConfigError("unknown aggregate '" + o.agg +
                      "' (sum|count|min|max|avg)");
  LoadOptions lo;
  lo.format = parse_format(o.format);
  lo.skip_header = o.header;
  EngineConfig cfg;
  cfg.threads = o.threads;

  if (o.mode == "both") {
    auto combine = combine_from_name(o.combine);
    if (!combine)
      throw ConfigError("unknown combine '" + o.combine +
                        "' (multiply|add|absdiff|left|right)");
    ValuedTable r = load_valued_table(o.r_path, lo);
    ValuedTable s = load_valued_table(o.s_path, lo);
    AggregateResult res = join_aggregate_both(r, s, *combine, *agg, cfg, c);
    if (!o.out.empty()) {
      ResultSet raw = aggregate_to_raw(res);
      std::ofstream f(o.out);
      if (!f) throw IoError("cannot open " + o.out + " for writing");
      char buf[64];
      for (std::size_t i = 0; i < res.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", res.values[i]);
        if (raw.raw_x.type == ColumnType::u64)
          f << raw.raw_x.ints[i];
        else
          f << raw.raw_x.strs[i];
        f << '\t';
        if (raw.raw_z.type == ColumnType::u64)
          f << raw.raw_z.ints[i];
        else
          f << raw.raw_z.strs[i];
        f << '\t' << buf << '\n';
      }
    }
    print_report(res.report, o.json_mode, res.values.size(), std::cout);
  } else if (o.mode == "one") {
    RawTable r = load_table(o.r_path, lo);
    RawTable s = load_table(o.s_path, lo);
    GroupByResult res = join_aggregate_one(r, s, *agg, cfg, c);
    if (!o.out.empty()) {
      std::ofstream f(o.out);
      if (!f) throw IoError("cannot open " + o.out + " for writing");
      char buf[64];
      for (std::size_t i = 0; i < res.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", res.values[i]);
        if (res.keys.type == ColumnType::u64)
          f << res.keys.ints[i];
        else
          f << res.keys.strs[i];
        f << '\t' << buf << '\n';
      }
    }
    print_report(res.report, o.json_mode, res.values.size(), std::cout);
  } else {
    throw ConfigError("unknown --mode '" + o.mode + "' (both|one)");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
  std::string config;
  std::string algorithm;
  double seconds = 0;
  std::uint64_t out_j = 0;
  std::uint64_t out_p = 0;
  std::uint64_t peak_bytes = 0;
};

void emit_row(std::ofstream& csv, const BenchRow& row) {
  char buf[64];
  if (std::isinf(row.seconds))
    std::snprintf(buf, sizeof buf, "inf");
  else
    std::snprintf(buf, sizeof buf, "%.6f", row.seconds);
  std::string line = row.config + "," + row.algorithm + "," + buf + "," +
                     std::to_string(row.out_j) + "," +
                     std::to_string(row.out_p) + "," +
                     std::to_string(row.peak_bytes);
  csv << line << "\n";
  csv.flush();
  std::printf("%s\n", line.c_str());
}

BenchRow timed_run(const std::string& config, const std::string& algorithm,
                   const RawTable& r, const RawTable& s, Strategy force,
                   int threads, const CostConstants& c) {
  BenchRow row;
  row.config = config;
  row.algorithm = algorithm;
  EngineConfig cfg;
  cfg.force = force;
  cfg.threads = threads;
  cfg.count_only = true;
  auto t0 = std::chrono::steady_clock::now();
  try {
    JoinProjectOutput jp = join_project(r, s, cfg, c);
    row.seconds = seconds_since(t0);
    row.out_j = static_cast<std::uint64_t>(jp.report.out_j_estimate);
    row.out_p = jp.result.count;
    row.peak_bytes = jp.report.peak_bytes;
  } catch (const ResourceError&) {
    row.seconds = std::numeric_limits<double>::infinity();
  } catch (const std::bad_alloc&) {
    row.seconds = std::numeric_limits<double>::infinity();
  }
  return row;
}

const std::pair<const char*, Strategy> kBenchAlgos[] = {
    {"dim3", Strategy::auto_select},
    {"classical", Strategy::classical},
    {"sparse", Strategy::sparse_only},
    {"dense", Strategy::dense_only},
};

void bench_crossing(std::ofstream& csv, int threads, const CostConstants& c) {
  const std::size_t rows = 100000;
  const std::uint64_t ns[] = {100, 1000, 10000, 100000, 1000000};
  for (std::size_t i = 0; i < std::size(ns); ++i) {
    RawTable r = gen_uniform(rows, ns[i], 0x1000 + i);
    RawTable s = gen_uniform(rows, ns[i], 0x2000 + i);
    std::string config = "n=" + std::to_string(ns[i]);
    for (auto [name, force] : kBenchAlgos)
      emit_row(csv, timed_run(config, name, r, s, force, threads, c));
  }
}

void bench_zipf(std::ofstream& csv, int threads, const CostConstants& c) {
  const std::size_t rows = 100000;
  const std::uint64_t n = 100000;
  const double alphas[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t i = 0; i < std::size(alphas); ++i) {
    RawTable r = gen_zipf(rows, n, alphas[i], ZipfColumns::left, 0x3000 + i);
    RawTable s = gen_zipf(rows, n, alphas[i], ZipfColumns::left, 0x4000 + i);
    char cbuf[32];
    std::snprintf(cbuf, sizeof cbuf, "alpha=%.2f", alphas[i]);
    for (auto [name, force] : kBenchAlgos)
      emit_row(csv, timed_run(cbuf, name, r, s, force, threads, c));
  }
}

void bench_rmat(std::ofstream& csv, int threads, const CostConstants& c) {
  const std::size_t edges = 100000;
  const int scales[] = {10, 12, 14};
  for (std::size_t i = 0; i < std::size(scales); ++i) {
    RawTable r = gen_rmat(scales[i], edges, 0.57, 0.19, 0.19, 0.05, 0x5000 + i);
    RawTable s = gen_rmat(scales[i], edges, 0.57, 0.19, 0.19, 0.05, 0x6000 + i);
    std::string config = "log2n=" + std::to_string(scales[i]);
    for (auto [name, force] : kBenchAlgos)
      emit_row(csv, timed_run(config, name, r, s, force, threads, c));
  }
}

void bench_caching(std::ofstream& csv, int threads, const CostConstants& c) {
  const std::size_t rows = 100000;
  const std::uint64_t n = 100000;
  RawTable r = gen_zipf(rows, n, 1.0, ZipfColumns::left, 0x7001);
  RawTable s = gen_zipf(rows, n, 1.0, ZipfColumns::left, 0x7002);
  std::string config = "zipf_alpha=1";

  EngineConfig inst;
  inst.force = Strategy::hybrid;
  inst.threads = threads;
  inst.collect_cache_stats = true;
  auto t0 = std::chrono::steady_clock::now();
  JoinProjectOutput probe = join_project(r, s, inst, c);
  BenchRow prow;
  prow.config = config;
  prow.algorithm = "populate";
  prow.seconds = seconds_since(t0);
  prow.out_j = static_cast<std::uint64_t>(probe.report.out_j_estimate);
  prow.out_p = probe.result.count;
  prow.peak_bytes = probe.report.peak_bytes;
  emit_row(csv, prow);

  std::uint64_t fp = table_fingerprint(r, s);
  CacheStore all = populate_cache(probe, UINT64_MAX, fp, c);
  std::size_t keep = (all.entries.size() + 9) / 10;  // top 10% by score
  std::uint64_t budget = 0;
  for (std::size_t i = 0; i < keep; ++i) budget += all.entries[i].space_units();
  CacheStore store = budget ? populate_cache(probe, budget, fp, c) : all;

  emit_row(csv, timed_run(config, "uncached", r, s, Strategy::hybrid, threads, c));

  BenchRow crow;
  crow.config = config;
  crow.algorithm = "cached";
  EngineConfig cfg;
  cfg.force = Strategy::hybrid;
  cfg.threads = threads;
  cfg.count_only = true;
  t0 = std::chrono::steady_clock::now();
  JoinProjectOutput jp = join_project_with_cache(r, s, store, cfg, c);
  crow.seconds = seconds_since(t0);
  crow.out_j = static_cast<std::uint64_t>(jp.report.out_j_estimate);
  crow.out_p = jp.result.count;
  crow.peak_bytes = jp.report.peak_bytes;
  emit_row(csv, crow);
}

int run_bench(const std::string& suite, const std::string& out_csv,
              const std::string& consts, int threads) {
  CostConstants c = resolve_constants(consts);
  std::ofstream csv(out_csv);
  if (!csv) throw IoError("cannot open " + out_csv + " for writing");
  csv << "config,algorithm,seconds,out_j,out_p,peak_bytes\n";
  if (suite == "crossing")
    bench_crossing(csv, threads, c);
  else if (suite == "zipf-sweep")
    bench_zipf(csv, threads, c);
  else if (suite == "rmat-sweep")
    bench_rmat(csv, threads, c);
  else if (suite == "caching")
    bench_caching(csv, threads, c);
  else
    throw ConfigError("unknown suite '" + suite +
                      "' (crossing|zipf-sweep|rmat-sweep|caching)");
  return 0;
}

// ---------------------------------------------------------------------------
// plan-mjp

int run_plan_mjp(const std::string& manifest_path, const std::string& strategy,
                 const std::string& consts, int threads, bool json_mode) {
  CostConstants c = resolve_constants(consts);
  PlanKind kind;
  if (strategy == "dp")
    kind = PlanKind::dp;
  else if (strategy == "eager")
    kind = PlanKind::eager;
  else if (strategy == "lazy")
    kind = PlanKind::lazy;
  else
    throw ConfigError("unknown --strategy '" + strategy + "' (dp|eager|lazy)");

  ChainManifest m = load_manifest(manifest_path);
  std::vector<RawTable> tables;
  tables.reserve(m.tables.size());
  for (const auto& p : m.tables) tables.push_back(load_table(p));

  ChainSpec spec;
  if (!m.out_j.empty()) {
    spec.k = static_cast<int>(tables.size());
    spec.sizes.assign(tables.size() + 1, 0);
    spec.out_j.assign(tables.size() + 1, 0);
    spec.out_p.assign(tables.size() + 1, 0);
    for (std::size_t i = 1; i <= tables.size(); ++i)
      spec.sizes[i] = static_cast<double>(tables[i - 1].size());
    spec.out_j[1] = spec.out_p[1] = spec.sizes[1];
    for (std::size_t i = 2; i <= tables.size(); ++i) {
      spec.out_j[i] = m.out_j[i - 2];
      spec.out_p[i] = m.out_p[i - 2];
    }
  } else {
    spec = chain_spec_from_tables(tables);
  }

  ChainPlan plan = make_plan(spec, kind, c);
  EngineConfig cfg;
  cfg.threads = threads;
  ChainExecution exec = execute_plan(tables, plan, cfg, c);

  auto join_list = [](const auto& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(v[i]);
    }
    return s;
  };
  if (json_mode) {
    json j;
    j["strategy"] = strategy;
    j["positions"] = plan.dedup_positions;
    j["est_cost"] = plan.est_cost;
    j["count"] = exec.result.count;
    j["join_out"] = exec.join_out;
    j["ms_total"] = exec.ms_total;
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("strategy=%s\n", strategy.c_str());
    std::printf("positions=%s\n", join_list(plan.dedup_positions).c_str());
    std::printf("est_cost=%.6g\n", plan.est_cost);
    std::printf("count=%zu\n", exec.result.count);
    std::printf("join_out=%s\n", join_list(exec.join_out).c_str());
    std::printf("ms_total=%.3f\n", exec.ms_total);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"density-adaptive join-project engine"};
  app.require_subcommand(1);

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "measure machine cost constants");
  std::string cal_out;
  std::uint64_t cal_mib = 256;
  int cal_runs = 5;
  std::uint64_t cal_ops = 1ull << 22;
  cal->add_option("-o,--out", cal_out, "write constants file");
  cal->add_option("--sample-mib", cal_mib, "working-set size per benchmark");
  cal->add_option("--runs", cal_runs, "repetitions (median taken)");
  cal->add_option("--ops", cal_ops, "timed operations per run");

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic table");
  gen->require_subcommand(1);
  GenOpts g;
  auto add_common = [&](CLI::App* sub, bool rowful) {
    if (rowful) sub->add_option("--rows", g.rows, "tuple count")->required();
    sub->add_option("--seed", g.seed, "stream seed");
    sub->add_option("-o,--out", g.out, "output path")->required();
    sub->add_option("--format", g.format, "auto|tsv|csv|binary");
  };
  auto* gu = gen->add_subcommand("uniform", "both columns uniform");
  add_common(gu, true);
  gu->add_option("--max", g.max, "domain size")->required();
  auto* gz = gen->add_subcommand("zipf", "skewed column(s)");
  add_common(gz, true);
  gz->add_option("--max", g.max, "domain size")->required();
  gz->add_option("--alpha", g.alpha, "Zipf exponent");
  gz->add_option("--zipf-cols", g.zipf_cols, "both|left|right");
  auto* gr = gen->add_subcommand("rmat", "recursive-quadrant graph");
  add_common(gr, false);
  gr->add_option("--log2-n", g.log2_n, "vertex count exponent")->required();
  gr->add_option("--edges", g.edges, "edge count")->required();
  gr->add_option("--pa", g.pa, "quadrant probability a");
  gr->add_option("--pb", g.pb, "quadrant probability b");
  gr->add_option("--pc", g.pc, "quadrant probability c");
  gr->add_option("--pd", g.pd, "quadrant probability d");

  // join-project
  auto* jpcmd = app.add_subcommand("join-project",
                                   "distinct (x, z) pairs across the join");
  JoinOpts jo;
  jpcmd->add_option("r", jo.r_path, "table R(x, y)")->required();
  jpcmd->add_option("s", jo.s_path, "table S(z, y)")->required();
  jpcmd->add_option("--consts", jo.consts, "constants file (or DIM3_CONSTS)");
  jpcmd->add_option("--force", jo.force, "auto|classical|hybrid|sparse|dense");
  jpcmd->add_option("--threads", jo.threads, "worker count");
  auto* jp_out = jpcmd->add_option("--out", jo.out,
                                   "materialize pairs to this path");
  jpcmd->add_option("--report", jo.report_path, "also write report here");
  jpcmd->add_option("--format", jo.format, "input format");
  jpcmd->add_flag("--header", jo.header, "skip first input line");
  jpcmd->add_flag("--json", jo.json_mode, "JSON report");
  jpcmd->add_flag("--count-only", jo.count_only,
                  "count, do not materialize (default unless --out)")
      ->excludes(jp_out);
  jpcmd->add_option("--cache-store", jo.cache_store, "cache file path");
  jpcmd->add_option("--cache-budget", jo.cache_budget,
                    "cache size in id units");
  jpcmd->add_flag("--cache-populate", jo.cache_populate,
                  "build the cache instead of using it");

  // aggregate
  auto* agcmd = app.add_subcommand("aggregate", "join-aggregate variants");
  AggOpts ao;
  agcmd->add_option("r", ao.r_path, "table R")->required();
  agcmd->add_option("s", ao.s_path, "table S")->required();
  agcmd->add_option("--consts", ao.consts, "constants file (or DIM3_CONSTS)");
  agcmd->add_option("--mode", ao.mode,
                    "both: per (x,z) over two value columns; one: per x over "
                    "S's key column");
  agcmd->add_option("--agg", ao.agg, "sum|count|min|max|avg")->required();
  agcmd->add_option("--combine", ao.combine,
                    "multiply|add|absdiff|left|right (mode both)");
  agcmd->add_option("--threads", ao.threads, "worker count");
  agcmd->add_option("--format", ao.format, "input format");
  agcmd->add_flag("--header", ao.header, "skip first input line");
  agcmd->add_flag("--json", ao.json_mode, "JSON report");
  agcmd->add_option("--out", ao.out, "write result rows (TSV)");

  // bench
  auto* bcmd = app.add_subcommand("bench", "benchmark sweeps");
  std::string b_suite, b_out, b_consts;
  int b_threads = 1;
  bcmd->add_option("--suite", b_suite,
                   "crossing|zipf-sweep|rmat-sweep|caching")->required();
  bcmd->add_option("-o,--out", b_out, "output CSV")->required();
  bcmd->add_option("--consts", b_consts, "constants file (or DIM3_CONSTS)");
  bcmd->add_option("--threads", b_threads, "worker count");

  // plan-mjp
  auto* pcmd = app.add_subcommand("plan-mjp", "plan and run a join chain");
  std::string p_manifest, p_strategy = "dp", p_consts;
  int p_threads = 1;
  bool p_json = false;
  pcmd->add_option("manifest", p_manifest, "chain manifest")->required();
  pcmd->add_option("--strategy", p_strategy, "dp|eager|lazy");
  pcmd->add_option("--consts", p_consts, "constants file (or DIM3_CONSTS)");
  pcmd->add_option("--threads", p_threads, "worker count");
  pcmd->add_flag("--json", p_json, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cal->parsed()) {
      CalibrationOptions co;
      co.sample_bytes = cal_mib << 20;
      co.runs = cal_runs;
      co.ops = cal_ops;
      CostConstants c = calibrate(co);
      print_constants(c);
      if (!cal_out.empty()) save_constants(cal_out, c);
      return 0;
    }
    if (gen->parsed()) {
      const char* kind = gen->got_subcommand("uniform")  ? "uniform"
                         : gen->got_subcommand("zipf")   ? "zipf"
                                                         : "rmat";
      return run_generate(kind, g);
    }
    if (jpcmd->parsed()) return run_join_project(jo);
    if (agcmd->parsed()) return run_aggregate(ao);
    if (bcmd->parsed()) return run_bench(b_suite, b_out, b_consts, b_threads);
    if (pcmd->parsed())
      return run_plan_mjp(p_manifest, p_strategy, p_consts, p_threads, p_json);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const CacheInvalidError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ResourceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "error: out of memory\n");
    return 4;
  }
  return 0;
}
