#include "dim3/classical.hpp"

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace dim3 {
namespace {

inline std::uint64_t hash_key(std::uint64_t k) { return mix64(k); }
inline std::uint64_t hash_key(std::string_view s) {
  return hash_bytes(s.data(), s.size(), 0x9e3779b97f4a7c15ULL);
}

constexpr Code kNoGroup = static_cast<Code>(-1);

// Insert-only open-addressing map from key to dense id, linear probing,
// regrown at 70% load. slot_ids stores id+1 so 0 can mark empty slots.
template <typename K>
class FlatMap {
 public:
  explicit FlatMap(std::size_t expect = 0) { rehash(capacity_for(expect)); }

  std::size_t size() const { return n_; }

  std::pair<Code, bool> insert_or_lookup(const K& k) {
    if ((n_ + 1) * 10 > (mask_ + 1) * 7) rehash((mask_ + 1) * 2);
    std::size_t i = hash_key(k) & mask_;
    while (slot_ids_[i] != 0) {
      if (slot_keys_[i] == k) return {slot_ids_[i] - 1, false};
      i = (i + 1) & mask_;
    }
    slot_keys_[i] = k;
    slot_ids_[i] = static_cast<Code>(++n_);
    return {static_cast<Code>(n_ - 1), true};
  }

  Code find(const K& k) const {
    std::size_t i = hash_key(k) & mask_;
    while (slot_ids_[i] != 0) {
      if (slot_keys_[i] == k) return slot_ids_[i] - 1;
      i = (i + 1) & mask_;
    }
    return kNoGroup;
  }

 private:
  static std::size_t capacity_for(std::size_t n) {
    std::size_t cap = 16;
    while (cap * 7 < n * 10) cap <<= 1;
    return cap;
  }

  void rehash(std::size_t cap) {
    std::vector<K> old_keys = std::move(slot_keys_);
    std::vector<Code> old_ids = std::move(slot_ids_);
    slot_keys_.assign(cap, K{});
    slot_ids_.assign(cap, 0);
    mask_ = cap - 1;
    for (std::size_t i = 0; i < old_ids.size(); ++i) {
      if (old_ids[i] == 0) continue;
      std::size_t j = hash_key(old_keys[i]) & mask_;
      while (slot_ids_[j] != 0) j = (j + 1) & mask_;
      slot_keys_[j] = old_keys[i];
      slot_ids_[j] = old_ids[i];
    }
  }

  std::vector<K> slot_keys_;
  std::vector<Code> slot_ids_;
  std::size_t mask_ = 0;
  std::size_t n_ = 0;
};

// Values are interned to dense local codes so that dedup keys are single
// 64-bit words regardless of column type. first_row remembers where to copy
// the raw value back from.
template <typename K>
struct Interner {
  FlatMap<K> map;
  std::vector<std::size_t> first_row;

  Code encode(const K& k, std::size_t row) {
    auto [id, fresh] = map.insert_or_lookup(k);
    if (fresh) first_row.push_back(row);
    return id;
  }
};

template <typename K>
K key_at(const ColumnData& col, std::size_t i);

template <>
std::uint64_t key_at<std::uint64_t>(const ColumnData& col, std::size_t i) {
  return col.ints[i];
}
template <>
std::string_view key_at<std::string_view>(const ColumnData& col, std::size_t i) {
  return col.strs[i];
}

void copy_value(const ColumnData& src, std::size_t i, ColumnData* dst) {
  if (src.type == ColumnType::u64)
    dst->push_int(src.ints[i]);
  else
    dst->push_str(src.strs[i]);
}

template <typename YKey, typename XKey, typename ZKey>
void join_typed(const RawTable& r, const RawTable& s, bool count_only,
                MemoryBudget* budget, ClassicalStats* stats, ResultSet* out) {
  // Build: group s rows by y. Grouping keeps s insertion order inside each y
  // group, and duplicates are kept; the projection dedup below is what
  // removes them from the output.
  BudgetCharge scratch(budget,
                       s.size() * 24 + r.size() / 8 + 64);
  Interner<ZKey> z_intern;
  FlatMap<YKey> ymap(s.size());
  std::vector<Code> s_group(s.size());
  std::vector<Code> s_zcode(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    s_group[j] = ymap.insert_or_lookup(key_at<YKey>(s.right, j)).first;
    s_zcode[j] = z_intern.encode(key_at<ZKey>(s.left, j), j);
  }
  std::vector<std::uint64_t> start(ymap.size() + 1, 0);
  for (Code g : s_group) ++start[g + 1];
  for (std::size_t g = 1; g < start.size(); ++g) start[g] += start[g - 1];
  std::vector<Code> grouped_z(s.size());
  {
    std::vector<std::uint64_t> cur(start.begin(), start.end() - 1);
    for (std::size_t j = 0; j < s.size(); ++j)
      grouped_z[cur[s_group[j]]++] = s_zcode[j];
  }
  if (stats != nullptr) stats->build_keys = ymap.size();

  Interner<XKey> x_intern;
  FlatMap<std::uint64_t> seen(1024);
  std::vector<std::pair<Code, Code>> pairs;
  std::uint64_t charged = 0;
  std::uint64_t intermediate = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    Code g = ymap.find(key_at<YKey>(r.right, i));
    if (g == kNoGroup) continue;
    Code xc = x_intern.encode(key_at<XKey>(r.left, i), i);
    for (std::uint64_t idx = start[g]; idx < start[g + 1]; ++idx) {
      Code zc = grouped_z[idx];
      ++intermediate;
      std::uint64_t key = (static_cast<std::uint64_t>(xc) << 32) | zc;
      if (!seen.insert_or_lookup(key).second) continue;
      if (!count_only) pairs.emplace_back(xc, zc);
      if (budget != nullptr && seen.size() - charged >= 65536) {
        budget->charge((seen.size() - charged) * (count_only ? 16 : 24));
        charged = seen.size();
      }
    }
  }
  if (budget != nullptr && seen.size() > charged)
    budget->charge((seen.size() - charged) * (count_only ? 16 : 24));

  if (stats != nullptr) stats->intermediate_pairs = intermediate;
  out->count = seen.size();
  out->materialized = !count_only;
  if (count_only) return;
  for (auto [xc, zc] : pairs) {
    copy_value(r.left, x_intern.first_row[xc], &out->raw_x);
    copy_value(s.left, z_intern.first_row[zc], &out->raw_z);
  }
}

template <typename YKey, typename XKey>
void join_dispatch_z(const RawTable& r, const RawTable& s, bool count_only,
                     MemoryBudget* budget, ClassicalStats* stats,
                     ResultSet* out) {
  if (s.left.type == ColumnType::u64)
    join_typed<YKey, XKey, std::uint64_t>(r, s, count_only, budget, stats, out);
  else
    join_typed<YKey, XKey, std::string_view>(r, s, count_only, budget, stats,
                                             out);
}

template <typename YKey>
void join_dispatch_x(const RawTable& r, const RawTable& s, bool count_only,
                     MemoryBudget* budget, ClassicalStats* stats,
                     ResultSet* out) {
  if (r.left.type == ColumnType::u64)
    join_dispatch_z<YKey, std::uint64_t>(r, s, count_only, budget, stats, out);
  else
    join_dispatch_z<YKey, std::string_view>(r, s, count_only, budget, stats,
                                            out);
}

}  // namespace

ResultSet hash_join_dedup(const RawTable& r, const RawTable& s,
                          bool count_only, MemoryBudget* budget,
                          ClassicalStats* stats) {
  ResultSet out;
  out.provenance = ResultSet::Provenance::raw;
  out.raw_x.type = r.left.type;
  out.raw_z.type = s.left.type;
  out.materialized = !count_only;
  // Mixed-type y columns cannot match any row.
  if (r.right.type != s.right.type || r.size() == 0 || s.size() == 0) return out;
  if (r.right.type == ColumnType::u64)
    join_dispatch_x<std::uint64_t>(r, s, count_only, budget, stats, &out);
  else
    join_dispatch_x<std::string_view>(r, s, count_only, budget, stats, &out);
  return out;
}

}  // namespace dim3
