#pragma once
// Bit-panel primitives shared by the partition step and the dense kernel.
// Rows are padded to whole W-bit blocks; padding bits are always zero.

#include <cstdint>
#include <span>
#include <vector>

#include "dim3/common.hpp"
#include "dim3/relation.hpp"

namespace dim3 {

constexpr std::uint32_t words_per_block(std::uint32_t w) { return w / 64; }

constexpr std::uint64_t padded_bits(std::uint64_t y_card, std::uint32_t w) {
  return (y_card + w - 1) / w * w;
}

// True iff any W-bit block of a AND b is nonzero, scanning blocks in order
// and stopping at the first hit. blocks_checked (optional) counts examined
// blocks including the hit block.
inline bool block_and_any(std::span<const std::uint64_t> a,
                          std::span<const std::uint64_t> b, std::uint32_t w,
                          std::uint64_t* blocks_checked = nullptr) {
  std::uint32_t wpb = words_per_block(w);
  std::size_t n_blocks = a.size() / wpb;
  for (std::size_t blk = 0; blk < n_blocks; ++blk) {
    std::size_t base = blk * wpb;
    std::uint64_t acc = 0;
    for (std::uint32_t j = 0; j < wpb; ++j) acc |= a[base + j] & b[base + j];
    if (blocks_checked != nullptr) ++*blocks_checked;
    if (acc != 0) return true;
  }
  return false;
}

// Scalar existence check: probes the bitmap at each y in order, stopping at
// the first set bit. probes (optional) counts examined positions.
inline bool probe_any(std::span<const Code> ys,
                      std::span<const std::uint64_t> bits,
                      std::uint64_t* probes = nullptr) {
  for (Code y : ys) {
    if (probes != nullptr) ++*probes;
    if ((bits[y >> 6] >> (y & 63)) & 1) return true;
  }
  return false;
}

// Reusable per-row bitmap: set from a sorted column list, cleared by
// revisiting only the touched words.
class RowBitmap {
 public:
  RowBitmap(std::uint32_t y_card, std::uint32_t w)
      : words_(padded_bits(y_card, w) / 64, 0) {}

  void fill_from(std::span<const Code> ys) {
    for (Code y : ys) {
      std::uint64_t wi = y >> 6;
      if (words_[wi] == 0) touched_.push_back(static_cast<std::uint32_t>(wi));
      words_[wi] |= 1ull << (y & 63);
    }
  }
  void clear() {
    for (std::uint32_t wi : touched_) words_[wi] = 0;
    touched_.clear();
  }
  std::span<const std::uint64_t> words() const { return words_; }
  std::uint64_t bytes() const { return words_.size() * 8; }

 private:
  std::vector<std::uint64_t> words_;
  std::vector<std::uint32_t> touched_;
};

// Panel of per-z bitmaps for the dense partition. Storage is exactly
// (number of dense z) * padded(y_card) bits.
struct BitmapPanel {
  std::vector<Code> z_ids;            // dense z codes, ascending
  std::vector<std::uint32_t> m_z;     // degree of each dense z
  std::vector<std::uint64_t> blocks;  // rows concatenated
  std::uint32_t y_card = 0;
  std::uint32_t w = kBlockBits;

  std::size_t rows() const { return z_ids.size(); }
  std::uint64_t row_words() const { return padded_bits(y_card, w) / 64; }
  std::span<const std::uint64_t> row(std::size_t i) const {
    return {blocks.data() + i * row_words(), blocks.data() + (i + 1) * row_words()};
  }
  std::uint64_t bits() const { return blocks.size() * 64; }
  std::uint64_t bytes() const { return blocks.size() * 8; }
  bool test(std::size_t row_idx, Code y) const {
    const std::uint64_t* r = blocks.data() + row_idx * row_words();
    return (r[y >> 6] >> (y & 63)) & 1;
  }
};

}  // namespace dim3
