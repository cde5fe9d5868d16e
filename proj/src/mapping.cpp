#include "dim3/mapping.hpp"

#include <algorithm>
#include <bit>

namespace dim3 {
namespace {

constexpr std::size_t kInitialSlots = 64;

std::uint64_t next_pow2(std::uint64_t v) {
  return std::bit_ceil(std::max<std::uint64_t>(v, 2));
}

// Slot packing: high 32 bits hold the hash tag, low 32 bits local_code + 1.
// A slot is empty iff its low 32 bits are zero.
constexpr std::uint64_t slot_pack(std::uint32_t tag, Code local) {
  return (static_cast<std::uint64_t>(tag) << 32) |
         (static_cast<std::uint64_t>(local) + 1);
}
constexpr bool slot_empty(std::uint64_t s) { return (s & 0xffffffffull) == 0; }
constexpr Code slot_local(std::uint64_t s) {
  return static_cast<Code>((s & 0xffffffffull) - 1);
}
constexpr std::uint32_t slot_tag(std::uint64_t s) {
  return static_cast<std::uint32_t>(s >> 32);
}

}  // namespace

Dictionary::Dictionary(ColumnType type, const MappingConfig& cfg)
    : type_(type), cfg_(cfg) {
  parts_.resize(1);
  parts_[0].slots.assign(kInitialSlots, 0);
  parts_[0].mask = kInitialSlots - 1;
}

Dictionary Dictionary::identity(Code card) {
  Dictionary d;
  d.identity_ = true;
  d.next_code_ = card;
  d.parts_.clear();
  return d;
}

template <class V>
Code Dictionary::insert_impl(Part& p, V v) {
  if (static_cast<double>(p.used + 1) >
      cfg_.max_load * static_cast<double>(p.slots.size()))
    grow(p);

  std::uint64_t h = value_hash(v);
  std::uint64_t idx = (h >> part_bits_) & p.mask;
  std::uint32_t tag = static_cast<std::uint32_t>(h >> 32);
  for (int i = 0; i < cfg_.max_probe; ++i) {
    std::uint64_t& s = p.slots[(idx + i) & p.mask];
    if (slot_empty(s)) {
      Code local = p.local_count++;
      s = slot_pack(tag, local);
      p.used++;
      if constexpr (std::is_same_v<V, std::uint64_t>)
        rev_int_.push_back(v);
      else
        rev_str_.emplace_back(v);
      return local;
    }
    if (slot_tag(s) == tag && value_eq(p, slot_local(s), v))
      return slot_local(s);
  }
  // Probe window full: stash.
  if constexpr (std::is_same_v<V, std::uint64_t>) {
    auto [it, inserted] = p.stash_int.try_emplace(v, p.local_count);
    if (inserted) {
      p.local_count++;
      rev_int_.push_back(v);
    }
    return it->second;
  } else {
    auto [it, inserted] = p.stash_str.try_emplace(std::string(v), p.local_count);
    if (inserted) {
      p.local_count++;
      rev_str_.emplace_back(v);
    }
    return it->second;
  }
}

void Dictionary::grow(Part& p) {
  p.slots.assign(next_pow2(p.slots.size() * 2), 0);
  p.mask = p.slots.size() - 1;
  p.used = 0;
  reinsert_all(p);
}

void Dictionary::reinsert_all(Part& p) {
  auto probe_place = [&](std::uint64_t h, Code local) -> bool {
    std::uint64_t idx = (h >> part_bits_) & p.mask;
    std::uint32_t tag = static_cast<std::uint32_t>(h >> 32);
    for (int i = 0; i < cfg_.max_probe; ++i) {
      std::uint64_t& s = p.slots[(idx + i) & p.mask];
      if (slot_empty(s)) {
        s = slot_pack(tag, local);
        p.used++;
        return true;
      }
    }
    return false;
  };
  auto old_stash_int = std::move(p.stash_int);
  auto old_stash_str = std::move(p.stash_str);
  p.stash_int = {};
  p.stash_str = {};
  std::vector<bool> stashed(p.local_count, false);
  for (auto& [v, c] : old_stash_int) stashed[c] = true;
  for (auto& [v, c] : old_stash_str) stashed[c] = true;
  for (Code local = 0; local < p.local_count; ++local) {
    if (stashed[local]) continue;
    if (type_ == ColumnType::u64) {
      std::uint64_t v = rev_int_[p.base + local];
      if (!probe_place(value_hash(v), local)) p.stash_int.emplace(v, local);
    } else {
      std::string_view v = rev_str_[p.base + local];
      if (!probe_place(value_hash(v), local))
        p.stash_str.emplace(std::string(v), local);
    }
  }
  for (auto& [v, c] : old_stash_int)
    if (!probe_place(value_hash(v), c)) p.stash_int.emplace(v, c);
  for (auto& [v, c] : old_stash_str)
    if (!probe_place(value_hash(std::string_view(v)), c))
      p.stash_str.emplace(v, c);
}

Code Dictionary::insert_or_lookup(std::uint64_t v) {
  if (identity_ || parts_.size() != 1 || type_ != ColumnType::u64)
    throw ConfigError("insert_or_lookup requires a single-partition u64 dictionary");
  Code local = insert_impl(parts_[0], v);
  next_code_ = static_cast<Code>(rev_int_.size());
  return local;
}

Code Dictionary::insert_or_lookup(std::string_view v) {
  if (identity_ || parts_.size() != 1 || type_ != ColumnType::bytes)
    throw ConfigError("insert_or_lookup requires a single-partition bytes dictionary");
  Code local = insert_impl(parts_[0], v);
  next_code_ = static_cast<Code>(rev_str_.size());
  return local;
}

template <class V>
std::optional<Code> Dictionary::lookup_impl(V v) const {
  std::uint64_t h = value_hash(v);
  const Part& p =
      parts_[part_bits_ == 0 ? 0 : (h & ((1ull << part_bits_) - 1))];
  std::uint64_t idx = (h >> part_bits_) & p.mask;
  std::uint32_t tag = static_cast<std::uint32_t>(h >> 32);
  for (int i = 0; i < cfg_.max_probe; ++i) {
    std::uint64_t s = p.slots[(idx + i) & p.mask];
    if (slot_empty(s)) break;  // absent from table; stash may still hold it
    if (slot_tag(s) == tag && value_eq(p, slot_local(s), v))
      return p.base + slot_local(s);
  }
  if constexpr (std::is_same_v<V, std::uint64_t>) {
    if (!p.stash_int.empty()) {
      auto it = p.stash_int.find(v);
      if (it != p.stash_int.end()) return p.base + it->second;
    }
  } else {
    if (!p.stash_str.empty()) {
      auto it = p.stash_str.find(std::string(v));
      if (it != p.stash_str.end()) return p.base + it->second;
    }
  }
  return std::nullopt;
}

std::optional<Code> Dictionary::lookup(std::uint64_t v) const {
  if (identity_) {
    if (v < next_code_) return static_cast<Code>(v);
    return std::nullopt;
  }
  if (type_ != ColumnType::u64) return std::nullopt;
  return lookup_impl(v);
}

std::optional<Code> Dictionary::lookup(std::string_view v) const {
  if (identity_ || type_ != ColumnType::bytes) return std::nullopt;
  return lookup_impl(v);
}

template <class V>
Dictionary Dictionary::build_impl(std::span<const V> values, int partition_bits,
                                  std::vector<Code>& codes_out,
                                  const MappingConfig& cfg, ColumnType type) {
  Dictionary d(type, cfg);
  codes_out.resize(values.size());
  if (partition_bits <= 0) {
    for (std::size_t i = 0; i < values.size(); ++i)
      codes_out[i] = d.insert_impl(d.parts_[0], V(values[i]));
    d.next_code_ = static_cast<Code>(type == ColumnType::u64 ? d.rev_int_.size()
                                                             : d.rev_str_.size());
    return d;
  }

  std::size_t nparts = 1ull << partition_bits;
  d.part_bits_ = partition_bits;
  d.parts_.assign(nparts, Part{});

  // Scatter positions by the low hash bits.
  std::vector<std::vector<std::uint32_t>> pos(nparts);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t h = d.value_hash(V(values[i]));
    pos[h & (nparts - 1)].push_back(static_cast<std::uint32_t>(i));
  }

  // Build each partition with base 0; its reverse store lives in the global
  // arrays for the duration, then moves aside so the next partition starts
  // clean. Codes stay local until bases are known.
  std::vector<std::vector<std::uint64_t>> rev_int_parts(nparts);
  std::vector<std::vector<std::string>> rev_str_parts(nparts);
  for (std::size_t pi = 0; pi < nparts; ++pi) {
    Part& p = d.parts_[pi];
    p.slots.assign(
        next_pow2(std::max<std::uint64_t>(
            kInitialSlots,
            static_cast<std::uint64_t>(
                static_cast<double>(pos[pi].size()) / cfg.max_load) +
                1)),
        0);
    p.mask = p.slots.size() - 1;
    for (std::uint32_t i : pos[pi]) codes_out[i] = d.insert_impl(p, V(values[i]));
    rev_int_parts[pi] = std::move(d.rev_int_);
    rev_str_parts[pi] = std::move(d.rev_str_);
    d.rev_int_ = {};
    d.rev_str_ = {};
  }

  Code base = 0;
  for (std::size_t pi = 0; pi < nparts; ++pi) {
    d.parts_[pi].base = base;
    base += d.parts_[pi].local_count;
  }
  d.next_code_ = base;
  for (std::size_t pi = 0; pi < nparts; ++pi) {
    for (std::uint32_t i : pos[pi]) codes_out[i] += d.parts_[pi].base;
    d.rev_int_.insert(d.rev_int_.end(), rev_int_parts[pi].begin(),
                      rev_int_parts[pi].end());
    for (auto& s : rev_str_parts[pi]) d.rev_str_.push_back(std::move(s));
  }
  return d;
}

Dictionary Dictionary::build_partitioned(std::span<const std::uint64_t> values,
                                         int partition_bits,
                                         std::vector<Code>& codes_out,
                                         const MappingConfig& cfg) {
  return build_impl<std::uint64_t>(values, partition_bits, codes_out, cfg,
                                   ColumnType::u64);
}

Dictionary Dictionary::build_partitioned(std::span<const std::string> values,
                                         int partition_bits,
                                         std::vector<Code>& codes_out,
                                         const MappingConfig& cfg) {
  return build_impl<std::string>(values, partition_bits, codes_out, cfg,
                                 ColumnType::bytes);
}

std::uint64_t Dictionary::table_bytes() const {
  std::uint64_t b = 0;
  for (const auto& p : parts_) b += p.slots.size() * sizeof(std::uint64_t);
  return b;
}

std::size_t Dictionary::stash_size() const {
  std::size_t n = 0;
  for (const auto& p : parts_) n += p.stash_int.size() + p.stash_str.size();
  return n;
}

bool detect_natural_keys(const ColumnData& col, bool declared_hint, double c,
                         std::optional<std::uint64_t> distinct_estimate) {
  if (declared_hint) return true;
  if (col.type != ColumnType::u64) return false;
  std::size_t n = col.size();
  if (n == 0) return false;
  double bound = c * static_cast<double>(distinct_estimate.value_or(n));
  std::size_t samples = std::min<std::size_t>(n, 4096);
  std::size_t stride = std::max<std::size_t>(n / samples, 1);
  for (std::size_t i = 0; i < samples; ++i) {
    std::uint64_t v = col.ints[std::min(i * stride, n - 1)];
    if (static_cast<double>(v) >= bound) return false;
  }
  return true;
}

std::uint64_t MappingOutput::bytes() const {
  std::uint64_t b = (r.size() + s.size()) * 2 * sizeof(Code);
  b += dict_x.table_bytes() + dict_y.table_bytes() + dict_z.table_bytes();
  b += (static_cast<std::uint64_t>(dict_x.size()) + dict_y.size() +
        dict_z.size()) *
       8;
  return b;
}

namespace {

int partition_bits_for(std::size_t stream_len, const MappingConfig& cfg) {
  double est_bytes =
      static_cast<double>(stream_len) / cfg.max_load * sizeof(std::uint64_t);
  int k = 0;
  while (k < 12 && est_bytes / static_cast<double>(1ull << k) >
                       static_cast<double>(cfg.llc_bytes))
    ++k;
  return k;
}

Dictionary build_dict_for(const ColumnData& col, const MappingConfig& cfg,
                          std::vector<Code>& codes) {
  int k = partition_bits_for(col.size(), cfg);
  if (col.type == ColumnType::u64)
    return Dictionary::build_partitioned(
        std::span<const std::uint64_t>(col.ints), k, codes, cfg);
  return Dictionary::build_partitioned(std::span<const std::string>(col.strs),
                                       k, codes, cfg);
}

std::uint64_t require_natural(const ColumnData& col, const char* name) {
  if (col.type != ColumnType::u64)
    throw ConfigError(std::string("natural-key skip on column ") + name +
                      " requires integer values");
  std::uint64_t mx = 0;
  for (std::uint64_t v : col.ints) mx = std::max(mx, v);
  if (col.size() > 0 && mx >= (1ull << 32))
    throw ConfigError(std::string("natural-key skip on column ") + name +
                      " requires values below 2^32");
  return col.size() == 0 ? 0 : mx + 1;
}

}  // namespace

MappingOutput map_tables(const RawTable& r, const RawTable& s,
                         const SkipFlags& skip, const MappingConfig& cfg,
                         MemoryBudget* budget) {
  BudgetCharge scratch(budget, (r.size() + s.size()) * 24);
  MappingOutput out;

  // y first, from S; the same dictionary then filters R.
  std::vector<Code> s_y_codes;
  if (skip.y) {
    Code card = static_cast<Code>(std::max(require_natural(s.right, "y"),
                                           require_natural(r.right, "y")));
    out.dict_y = Dictionary::identity(card);
    s_y_codes.reserve(s.size());
    for (std::uint64_t v : s.right.ints)
      s_y_codes.push_back(static_cast<Code>(v));
  } else {
    out.dict_y = build_dict_for(s.right, cfg, s_y_codes);
  }

  std::vector<Code> s_z_codes;
  if (skip.z) {
    Code card = static_cast<Code>(require_natural(s.left, "z"));
    out.dict_z = Dictionary::identity(card);
    s_z_codes.reserve(s.size());
    for (std::uint64_t v : s.left.ints)
      s_z_codes.push_back(static_cast<Code>(v));
  } else {
    out.dict_z = build_dict_for(s.left, cfg, s_z_codes);
  }

  out.s.a = std::move(s_z_codes);
  out.s.b = std::move(s_y_codes);
  out.s.a_card = out.dict_z.size();
  out.s.b_card = out.dict_y.size();

  // R pass: keep rows whose y has a code, then map x over the survivors.
  std::vector<Code> r_y_codes;
  ColumnData surviving_x;
  surviving_x.type = r.left.type;
  r_y_codes.reserve(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::optional<Code> yc;
    if (r.right.type == ColumnType::u64)
      yc = out.dict_y.lookup(r.right.ints[i]);
    else
      yc = out.dict_y.lookup(std::string_view(r.right.strs[i]));
    if (!yc) {
      out.dropped_r++;
      continue;
    }
    out.r_kept.push_back(static_cast<std::uint32_t>(i));
    r_y_codes.push_back(*yc);
    if (r.left.type == ColumnType::u64)
      surviving_x.push_int(r.left.ints[i]);
    else
      surviving_x.push_str(r.left.strs[i]);
  }
  if (out.dropped_r == 0) {
    out.r_kept.clear();
    out.r_kept.shrink_to_fit();
  }

  std::vector<Code> r_x_codes;
  if (skip.x) {
    Code card = static_cast<Code>(require_natural(r.left, "x"));
    out.dict_x = Dictionary::identity(card);
    r_x_codes.reserve(surviving_x.size());
    for (std::uint64_t v : surviving_x.ints)
      r_x_codes.push_back(static_cast<Code>(v));
  } else {
    out.dict_x = build_dict_for(surviving_x, cfg, r_x_codes);
  }

  out.r.a = std::move(r_x_codes);
  out.r.b = std::move(r_y_codes);
  out.r.a_card = out.dict_x.size();
  out.r.b_card = out.dict_y.size();
  return out;
}

}  // namespace dim3
