#include "dim3/sparsebmm.hpp"

#include <atomic>

namespace dim3 {
namespace {

// Stamp array: -1 is virgin, otherwise the last x row that produced the z.
// Rows are processed in ascending order inside a chunk, so a stamp never
// needs resetting between rows.
template <bool kMaterialize, bool kCollect>
std::uint64_t run_chunk(const CsrMatrix& r, const CsrMatrix& s, Code z_card,
                        std::uint64_t x_lo, std::uint64_t x_hi,
                        const SparseOptions& opt,
                        std::vector<std::pair<Code, Code>>* out,
                        SpaStats* stats) {
  BudgetCharge spa_charge(opt.budget, static_cast<std::uint64_t>(z_card) * 8);
  std::vector<std::int64_t> spa(z_card, -1);
  if (stats != nullptr) {
    stats->spa_allocations++;
    stats->spa_entries = z_card;
  }
  std::uint64_t emitted = 0;
  std::uint64_t inner = 0;
  std::uint64_t charged_pairs = 0;
  for (std::uint64_t x = x_lo; x < x_hi; ++x) {
    std::int64_t stamp = static_cast<std::int64_t>(x);
    for (Code y : r.row(static_cast<Code>(x))) {
      for (Code z : s.row(y)) {
        ++inner;
        if constexpr (kCollect) (*opt.z_checks)[z]++;
        if (spa[z] != stamp) {
          spa[z] = stamp;
          ++emitted;
          if constexpr (kCollect) (*opt.z_results)[z]++;
          if constexpr (kMaterialize) {
            out->emplace_back(static_cast<Code>(x), z);
            if (opt.budget != nullptr && out->size() - charged_pairs >= 65536) {
              opt.budget->charge((out->size() - charged_pairs) * 8);
              charged_pairs = out->size();
            }
          }
        }
      }
    }
  }
  if (stats != nullptr) stats->inner_count += inner;
  return emitted;
}

}  // namespace

std::uint64_t sparse_bmm(const CsrMatrix& r_by_x, const CsrMatrix& s_sparse_by_y,
                         Code z_card, const SparseOptions& opt,
                         std::vector<std::pair<Code, Code>>* out,
                         SpaStats* stats) {
  bool collect = opt.z_checks != nullptr;
  int threads = collect ? 1 : opt.threads;
  if (collect) {
    opt.z_checks->assign(z_card, 0);
    if (opt.z_results != nullptr) opt.z_results->assign(z_card, 0);
  }

  if (threads <= 1) {
    if (collect) {
      if (out != nullptr)
        return run_chunk<true, true>(r_by_x, s_sparse_by_y, z_card, 0,
                                     r_by_x.n_rows, opt, out, stats);
      return run_chunk<false, true>(r_by_x, s_sparse_by_y, z_card, 0,
                                    r_by_x.n_rows, opt, nullptr, stats);
    }
    if (out != nullptr)
      return run_chunk<true, false>(r_by_x, s_sparse_by_y, z_card, 0,
                                    r_by_x.n_rows, opt, out, stats);
    return run_chunk<false, false>(r_by_x, s_sparse_by_y, z_card, 0,
                                   r_by_x.n_rows, opt, nullptr, stats);
  }

  std::uint64_t nchunks = std::min<std::uint64_t>(threads, std::max<Code>(r_by_x.n_rows, 1));
  std::vector<std::vector<std::pair<Code, Code>>> chunk_out(out != nullptr ? nchunks : 0);
  std::vector<SpaStats> chunk_stats(nchunks);
  std::vector<std::uint64_t> chunk_count(nchunks, 0);
  run_chunked(0, r_by_x.n_rows, static_cast<int>(nchunks),
              [&](std::uint64_t ci, std::uint64_t lo, std::uint64_t hi) {
                if (out != nullptr)
                  chunk_count[ci] = run_chunk<true, false>(
                      r_by_x, s_sparse_by_y, z_card, lo, hi, opt,
                      &chunk_out[ci], &chunk_stats[ci]);
                else
                  chunk_count[ci] = run_chunk<false, false>(
                      r_by_x, s_sparse_by_y, z_card, lo, hi, opt, nullptr,
                      &chunk_stats[ci]);
              });
  std::uint64_t total = 0;
  for (std::uint64_t ci = 0; ci < nchunks; ++ci) {
    total += chunk_count[ci];
    if (stats != nullptr) {
      stats->inner_count += chunk_stats[ci].inner_count;
      stats->spa_allocations += chunk_stats[ci].spa_allocations;
      stats->spa_entries = chunk_stats[ci].spa_entries;
    }
    if (out != nullptr)
      out->insert(out->end(), chunk_out[ci].begin(), chunk_out[ci].end());
  }
  return total;
}

}  // namespace dim3
