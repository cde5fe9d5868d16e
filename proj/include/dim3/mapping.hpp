#pragma once
// Dictionary encoding of join columns. Values map to dense u32 codes through
// an open-addressing table (linear probe, bounded probe length, stash for
// overflow). Columns whose estimated table exceeds the LLC are built in
// hash partitions; codes are then local code plus partition base.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dim3/common.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

struct MappingConfig {
  std::uint64_t llc_bytes = 12ull << 20;  // partition trigger
  double max_load = 0.7;
  int max_probe = 16;
};

class Dictionary {
 public:
  Dictionary() : Dictionary(ColumnType::u64, MappingConfig{}) {}
  explicit Dictionary(ColumnType type, const MappingConfig& cfg = {});

  // Identity dictionary for natural-key columns: code == value, no table.
  static Dictionary identity(Code card);

  // Insert-or-lookup in first-seen order: the i-th distinct value gets code i.
  // Only valid on single-partition dictionaries (the incremental path).
  Code insert_or_lookup(std::uint64_t v);
  Code insert_or_lookup(std::string_view v);

  std::optional<Code> lookup(std::uint64_t v) const;
  std::optional<Code> lookup(std::string_view v) const;

  // Bulk build with hash partitioning. Writes one code per input position.
  // Codes are dense in [0, size()) but ordered per-partition, not globally
  // first-seen. partition_bits == 0 degenerates to the incremental path.
  static Dictionary build_partitioned(std::span<const std::uint64_t> values,
                                      int partition_bits,
                                      std::vector<Code>& codes_out,
                                      const MappingConfig& cfg = {});
  static Dictionary build_partitioned(std::span<const std::string> values,
                                      int partition_bits,
                                      std::vector<Code>& codes_out,
                                      const MappingConfig& cfg = {});

  Code size() const { return next_code_; }
  ColumnType value_type() const { return type_; }
  bool is_identity() const { return identity_; }
  int partition_bits() const { return part_bits_; }

  std::uint64_t int_value(Code c) const { return identity_ ? c : rev_int_[c]; }
  std::string_view bytes_value(Code c) const { return rev_str_[c]; }

  std::uint64_t table_bytes() const;
  std::size_t stash_size() const;

 private:
  struct Part {
    std::vector<std::uint64_t> slots;  // packed (tag << 32 | local_code + 1)
    std::uint64_t mask = 0;
    std::size_t used = 0;
    Code base = 0;
    Code local_count = 0;
    std::unordered_map<std::uint64_t, Code> stash_int;  // value -> local code
    std::unordered_map<std::string, Code> stash_str;
  };

  std::uint64_t value_hash(std::uint64_t v) const { return mix64(v); }
  std::uint64_t value_hash(std::string_view v) const {
    return hash_bytes(v.data(), v.size());
  }
  // Invariant during any build: the part being filled has base 0 and its
  // local reverse store occupies rev_int_/rev_str_ wholesale, so value
  // comparisons go through the same arrays before and after base fixup.
  bool value_eq(const Part& p, Code local, std::uint64_t v) const {
    return rev_int_[p.base + local] == v;
  }
  bool value_eq(const Part& p, Code local, std::string_view v) const {
    return rev_str_[p.base + local] == v;
  }

  template <class V>
  Code insert_impl(Part& p, V v);
  template <class V>
  std::optional<Code> lookup_impl(V v) const;
  template <class V>
  static Dictionary build_impl(std::span<const V> values, int partition_bits,
                               std::vector<Code>& codes_out,
                               const MappingConfig& cfg, ColumnType type);
  void grow(Part& p);
  void reinsert_all(Part& p);

  ColumnType type_ = ColumnType::u64;
  bool identity_ = false;
  int part_bits_ = 0;
  MappingConfig cfg_;
  std::vector<Part> parts_;
  Code next_code_ = 0;
  // Reverse translation, indexed by code (partition base + local code).
  std::vector<std::uint64_t> rev_int_;
  std::vector<std::string> rev_str_;
};

// Sampled density heuristic for skipping the dictionary on integer key
// columns: true when a strided sample of the column contains only integers
// in [0, c * distinct_estimate). distinct_estimate defaults to the row
// count, an upper bound on the distinct count. A declared hint wins.
bool detect_natural_keys(const ColumnData& col, bool declared_hint = false,
                         double c = 2.0,
                         std::optional<std::uint64_t> distinct_estimate = {});

struct SkipFlags {
  bool x = false, y = false, z = false;
};

struct MappingOutput {
  MappedTable r, s;  // r rows (x, y), s rows (z, y)
  Dictionary dict_x, dict_y, dict_z;
  std::uint64_t dropped_r = 0;  // R tuples whose y never occurs in S
  // Original R row index per surviving mapped row; empty when nothing was
  // dropped (identity). Lets callers realign per-row payloads.
  std::vector<std::uint32_t> r_kept;
  std::uint64_t bytes() const;
};

// Maps both tables onto dense code spaces. The y dictionary is built from
// S (the designated smaller table); R rows whose y misses it are dropped.
// Skipped columns must be u64 with values below 2^32; their codes are the
// values themselves and the y semi-join filter is disabled.
MappingOutput map_tables(const RawTable& r, const RawTable& s,
                         const SkipFlags& skip = {},
                         const MappingConfig& cfg = {},
                         MemoryBudget* budget = nullptr);

}  // namespace dim3
