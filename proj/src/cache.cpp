#include "dim3/cache.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>

namespace dim3 {
namespace {

std::uint64_t column_hash(const ColumnData& col, std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ (col.type == ColumnType::u64 ? 1 : 2));
  if (col.type == ColumnType::u64) {
    if (!col.ints.empty())
      h = hash_bytes(col.ints.data(), col.ints.size() * 8, h);
  } else {
    for (const auto& s : col.strs) {
      std::uint64_t len = s.size();
      h = hash_bytes(&len, sizeof len, h);
      h = hash_bytes(s.data(), s.size(), h);
    }
  }
  return h;
}

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool read_pod(std::ifstream& in, T* v) {
  in.read(reinterpret_cast<char*>(v), sizeof *v);
  return in.gcount() == static_cast<std::streamsize>(sizeof *v);
}

}  // namespace

double cache_score(std::uint64_t n_sparse, std::uint64_t n_simd,
                   std::uint64_t n_nonsimd, std::uint64_t k,
                   std::uint64_t x_card, const CostConstants& c) {
  double cost = static_cast<double>(n_sparse) * (c.t_seqR + c.t_randRW) +
                static_cast<double>(n_simd) * c.t_ECd +
                static_cast<double>(n_nonsimd) * c.t_ECs;
  double space = 2.0 + static_cast<double>(std::min(k, x_card - k));
  return cost / space;
}

CacheEntry encode_entry(Code z, std::span<const Code> xs, Code x_card) {
  if (xs.empty()) throw ConfigError("cache entries require at least one partner");
  CacheEntry e;
  e.z = z;
  std::vector<Code> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    if (sorted[i] == sorted[i + 1])
      throw ConfigError("duplicate partner id in cache entry");
  if (sorted.back() >= x_card)
    throw ConfigError("partner id outside the x code space");

  std::uint64_t k = sorted.size();
  if (2 * k > x_card) {
    // Complement: everything in [0, x_card) that is not a partner.
    e.size = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(x_card);
    e.ids.reserve(x_card - k);
    std::size_t next = 0;
    for (Code x = 0; x < x_card; ++x) {
      if (next < sorted.size() && sorted[next] == x) {
        ++next;
        continue;
      }
      e.ids.push_back(x);
    }
  } else {
    e.size = static_cast<std::int64_t>(k);
    e.ids = std::move(sorted);
  }
  return e;
}

std::vector<Code> decode_entry(const CacheEntry& e, Code x_card) {
  if (e.size > 0) return e.ids;
  std::vector<Code> xs;
  xs.reserve(static_cast<std::size_t>(static_cast<std::int64_t>(x_card) + e.size));
  std::size_t next = 0;
  for (Code x = 0; x < x_card; ++x) {
    if (next < e.ids.size() && e.ids[next] == x) {
      ++next;
      continue;
    }
    xs.push_back(x);
  }
  return xs;
}

std::uint64_t table_fingerprint(const RawTable& r, const RawTable& s) {
  std::uint64_t h = 0x5ca1ab1ecafef00dull;
  std::uint64_t sizes[2] = {r.size(), s.size()};
  h = hash_bytes(sizes, sizeof sizes, h);
  h = column_hash(r.left, h);
  h = column_hash(r.right, h);
  h = column_hash(s.left, h);
  h = column_hash(s.right, h);
  return h;
}

CacheStore populate_cache(const JoinProjectOutput& run,
                          std::uint64_t budget_units,
                          std::uint64_t fingerprint, const CostConstants& c) {
  if (!run.mapping || !run.z_stats)
    throw ConfigError("cache population needs an instrumented hybrid run");
  if (!run.result.materialized)
    throw ConfigError("cache population needs materialized results");
  if (run.report.pairs_cached != 0)
    throw ConfigError("cache population needs an uncached run");

  const MappingOutput& m = *run.mapping;
  const ZCostStats& zs = *run.z_stats;
  Code x_card = m.r.a_card;
  Code z_card = m.s.a_card;
  bool swapped = run.report.swapped;

  CacheStore store;
  store.fingerprint = fingerprint;
  store.x_card = x_card;
  store.z_card = z_card;
  if (budget_units == 0 || z_card == 0) return store;

  // Partner lists per engine-orientation z, grouped via counting sort.
  std::vector<std::uint64_t> off(static_cast<std::size_t>(z_card) + 1, 0);
  for (auto [a, b] : run.result.code_pairs) off[(swapped ? a : b) + 1]++;
  for (Code z = 0; z < z_card; ++z) off[z + 1] += off[z];
  std::vector<Code> xs(run.result.code_pairs.size());
  std::vector<std::uint64_t> cursor(off.begin(), off.end() - 1);
  for (auto [a, b] : run.result.code_pairs) {
    Code ze = swapped ? a : b;
    xs[cursor[ze]++] = swapped ? b : a;
  }

  struct Ranked {
    double score;
    Code z;
  };
  std::vector<Ranked> ranked;
  for (Code z = 0; z < z_card; ++z) {
    std::uint64_t k = off[z + 1] - off[z];
    if (k == 0) continue;
    double score = cache_score(zs.n_sparse[z], zs.n_simd[z], zs.n_nonsimd[z],
                               k, x_card, c);
    if (score <= 0) continue;
    ranked.push_back({score, z});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.z < b.z;
  });

  std::uint64_t used = 0;
  for (const Ranked& r : ranked) {
    std::uint64_t k = off[r.z + 1] - off[r.z];
    std::uint64_t space = 2 + std::min<std::uint64_t>(k, x_card - k);
    if (used + space > budget_units) break;
    used += space;
    store.entries.push_back(encode_entry(
        r.z, std::span<const Code>(xs.data() + off[r.z], k), x_card));
  }
  return store;
}

void save_cache(const CacheStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_pod(out, store.fingerprint);
  write_pod(out, store.x_card);
  write_pod(out, store.z_card);
  write_pod(out, static_cast<std::uint32_t>(store.entries.size()));
  for (const auto& e : store.entries) {
    write_pod(out, e.z);
    write_pod(out, e.size);
    if (!e.ids.empty())
      out.write(reinterpret_cast<const char*>(e.ids.data()), e.ids.size() * 4);
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

CacheStore load_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  CacheStore store;
  std::uint32_t count = 0;
  if (!read_pod(in, &store.fingerprint) || !read_pod(in, &store.x_card) ||
      !read_pod(in, &store.z_card) || !read_pod(in, &count))
    throw FormatError(path.string() + ": truncated cache header");
  store.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CacheEntry e;
    if (!read_pod(in, &e.z) || !read_pod(in, &e.size))
      throw FormatError(path.string() + ": truncated cache entry");
    if (e.z >= store.z_card)
      throw FormatError(path.string() + ": entry z outside the z code space");
    std::uint64_t n_ids =
        static_cast<std::uint64_t>(e.size > 0 ? e.size : -e.size);
    if (n_ids > store.x_card)
      throw FormatError(path.string() + ": entry size outside the x code space");
    e.ids.resize(n_ids);
    if (n_ids > 0) {
      in.read(reinterpret_cast<char*>(e.ids.data()),
              static_cast<std::streamsize>(n_ids * 4));
      if (in.gcount() != static_cast<std::streamsize>(n_ids * 4))
        throw FormatError(path.string() + ": truncated cache ids");
      for (Code x : e.ids)
        if (x >= store.x_card)
          throw FormatError(path.string() + ": id outside the x code space");
    }
    store.entries.push_back(std::move(e));
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw FormatError(path.string() + ": trailing bytes after last entry");
  return store;
}

JoinProjectOutput join_project_with_cache(const RawTable& r, const RawTable& s,
                                          const CacheStore& store,
                                          const EngineConfig& cfg,
                                          const CostConstants& c) {
  if (cfg.force == Strategy::classical)
    throw ConfigError("cached execution requires the mapped pipeline");
  if (table_fingerprint(r, s) != store.fingerprint)
    throw CacheInvalidError("cache store does not match the input tables");

  auto t0 = std::chrono::steady_clock::now();
  std::vector<bool> exclude(store.z_card, false);
  std::vector<std::pair<Code, Code>> decoded;
  std::uint64_t total = 0;
  for (const auto& e : store.entries)
    total += static_cast<std::uint64_t>(
        e.size > 0 ? e.size : static_cast<std::int64_t>(store.x_card) + e.size);
  decoded.reserve(total);
  for (const auto& e : store.entries) {
    exclude[e.z] = true;
    if (e.size > 0) {
      for (Code x : e.ids) decoded.emplace_back(x, e.z);
    } else {
      std::size_t next = 0;
      for (Code x = 0; x < store.x_card; ++x) {
        if (next < e.ids.size() && e.ids[next] == x) {
          ++next;
          continue;
        }
        decoded.emplace_back(x, e.z);
      }
    }
  }
  double decode_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();

  EngineConfig run_cfg = cfg;
  if (run_cfg.force == Strategy::auto_select) run_cfg.force = Strategy::hybrid;
  HybridExtras extras;
  extras.exclude_z = &exclude;
  extras.prepend_pairs = &decoded;
  extras.cached_z = store.entries.size();
  JoinProjectOutput out = join_project_extended(r, s, run_cfg, c, &extras);
  out.report.ms_decode = decode_ms;
  return out;
}

}  // namespace dim3
