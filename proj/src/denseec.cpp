#include "dim3/denseec.hpp"

#include <algorithm>

namespace dim3 {
namespace {

template <bool kMaterialize, bool kCollect>
std::uint64_t run_chunk(const CsrMatrix& r, const BitmapPanel& panel,
                        const CostConstants& c, std::uint64_t x_lo,
                        std::uint64_t x_hi, const DenseOptions& opt,
                        std::vector<std::pair<Code, Code>>* out,
                        DenseEcStats* stats) {
  RowBitmap bitmap(panel.y_card, panel.w);
  BudgetCharge bitmap_charge(opt.budget, bitmap.bytes());
  F3ThresholdCache thresholds(panel.y_card, c);
  if (stats != nullptr) stats->row_bitmap_bytes = bitmap.bytes();

  std::uint64_t emitted = 0;
  std::uint64_t charged_pairs = 0;
  std::size_t n_dense = panel.rows();
  for (std::uint64_t x = x_lo; x < x_hi; ++x) {
    auto ys = r.row(static_cast<Code>(x));
    if (ys.empty() || n_dense == 0) continue;
    std::uint32_t m_x = static_cast<std::uint32_t>(ys.size());
    std::uint32_t threshold = opt.mode == DensePathMode::cost_based
                                  ? thresholds.get(m_x)
                                  : 0;
    // The row bitmap only serves the wide path; build it on first use.
    bool bitmap_ready = false;
    for (std::size_t j = 0; j < n_dense; ++j) {
      std::uint32_t m_z = panel.m_z[j];
      bool wide;
      switch (opt.mode) {
        case DensePathMode::force_wide:
          wide = true;
          break;
        case DensePathMode::force_probe:
          wide = false;
          break;
        default:
          wide = m_z > threshold;
      }
      bool hit;
      if (wide) {
        if (!bitmap_ready) {
          bitmap.fill_from(ys);
          bitmap_ready = true;
          if (stats != nullptr) stats->row_bitmaps_built++;
        }
        std::uint64_t blocks = 0;
        hit = block_and_any(bitmap.words(), panel.row(j), panel.w, &blocks);
        if (stats != nullptr) {
          stats->wide_encounters++;
          stats->blocks_checked += blocks;
        }
        if constexpr (kCollect) (*opt.z_wide_checks)[panel.z_ids[j]] += blocks;
      } else {
        std::uint64_t probes = 0;
        hit = probe_any(ys, panel.row(j), &probes);
        if (stats != nullptr) {
          stats->probe_encounters++;
          stats->probes_done += probes;
        }
        if constexpr (kCollect) (*opt.z_probe_checks)[panel.z_ids[j]] += probes;
      }
      if (hit) {
        ++emitted;
        if constexpr (kCollect) (*opt.z_results)[panel.z_ids[j]]++;
        if constexpr (kMaterialize) {
          out->emplace_back(static_cast<Code>(x), panel.z_ids[j]);
          if (opt.budget != nullptr && out->size() - charged_pairs >= 65536) {
            opt.budget->charge((out->size() - charged_pairs) * 8);
            charged_pairs = out->size();
          }
        }
      }
    }
    if (bitmap_ready) bitmap.clear();
  }
  if (stats != nullptr) {
    stats->threshold_memo_hits += thresholds.hits();
    stats->threshold_memo_misses += thresholds.misses();
  }
  return emitted;
}

}  // namespace

std::uint64_t dense_ec(const CsrMatrix& r_by_x, const BitmapPanel& panel,
                       const CostConstants& c, const DenseOptions& opt,
                       std::vector<std::pair<Code, Code>>* out,
                       DenseEcStats* stats) {
  bool collect = opt.z_wide_checks != nullptr;
  int threads = collect ? 1 : opt.threads;
  if (collect) {
    Code z_card = 0;
    for (Code z : panel.z_ids) z_card = std::max(z_card, static_cast<Code>(z + 1));
    if (opt.z_wide_checks->size() < z_card) opt.z_wide_checks->resize(z_card, 0);
    if (opt.z_probe_checks->size() < z_card) opt.z_probe_checks->resize(z_card, 0);
    if (opt.z_results != nullptr && opt.z_results->size() < z_card)
      opt.z_results->resize(z_card, 0);
  }

  if (threads <= 1) {
    if (collect) {
      if (out != nullptr)
        return run_chunk<true, true>(r_by_x, panel, c, 0, r_by_x.n_rows, opt,
                                     out, stats);
      return run_chunk<false, true>(r_by_x, panel, c, 0, r_by_x.n_rows, opt,
                                    nullptr, stats);
    }
    if (out != nullptr)
      return run_chunk<true, false>(r_by_x, panel, c, 0, r_by_x.n_rows, opt,
                                    out, stats);
    return run_chunk<false, false>(r_by_x, panel, c, 0, r_by_x.n_rows, opt,
                                   nullptr, stats);
  }

  std::uint64_t nchunks =
      std::min<std::uint64_t>(threads, std::max<Code>(r_by_x.n_rows, 1));
  std::vector<std::vector<std::pair<Code, Code>>> chunk_out(
      out != nullptr ? nchunks : 0);
  std::vector<DenseEcStats> chunk_stats(nchunks);
  std::vector<std::uint64_t> chunk_count(nchunks, 0);
  run_chunked(0, r_by_x.n_rows, static_cast<int>(nchunks),
              [&](std::uint64_t ci, std::uint64_t lo, std::uint64_t hi) {
                if (out != nullptr)
                  chunk_count[ci] = run_chunk<true, false>(
                      r_by_x, panel, c, lo, hi, opt, &chunk_out[ci],
                      &chunk_stats[ci]);
                else
                  chunk_count[ci] = run_chunk<false, false>(
                      r_by_x, panel, c, lo, hi, opt, nullptr, &chunk_stats[ci]);
              });
  std::uint64_t total = 0;
  for (std::uint64_t ci = 0; ci < nchunks; ++ci) {
    total += chunk_count[ci];
    if (stats != nullptr) {
      stats->wide_encounters += chunk_stats[ci].wide_encounters;
      stats->probe_encounters += chunk_stats[ci].probe_encounters;
      stats->blocks_checked += chunk_stats[ci].blocks_checked;
      stats->probes_done += chunk_stats[ci].probes_done;
      stats->row_bitmaps_built += chunk_stats[ci].row_bitmaps_built;
      stats->row_bitmap_bytes = chunk_stats[ci].row_bitmap_bytes;
      stats->threshold_memo_hits += chunk_stats[ci].threshold_memo_hits;
      stats->threshold_memo_misses += chunk_stats[ci].threshold_memo_misses;
    }
    if (out != nullptr)
      out->insert(out->end(), chunk_out[ci].begin(), chunk_out[ci].end());
  }
  return total;
}

}  // namespace dim3
