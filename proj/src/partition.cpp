#include "dim3/partition.hpp"

namespace dim3 {

PartitionResult partition_s_csr(const CsrMatrix& s_by_z, const DegreeStats& stats,
                                const CostConstants& c, PartitionForce force,
                                const std::vector<bool>* exclude,
                                MemoryBudget* budget) {
  Code n_z = s_by_z.n_rows;
  PartitionResult out;
  out.panel.y_card = s_by_z.n_cols;
  out.panel.w = c.w;

  // Decide side per z. Dictionary mapping yields no empty z columns; under
  // a natural-key skip, gap codes have m_z == 0 and are routed nowhere (they
  // hold no tuples and must not occupy a panel row).
  std::vector<bool> dense(n_z, false);
  F2Evaluator ev(stats, c);
  for (Code z = 0; z < n_z; ++z) {
    if (exclude != nullptr && (*exclude)[z]) continue;
    if (stats.m_z[z] == 0) continue;
    switch (force) {
      case PartitionForce::all_sparse:
        dense[z] = false;
        break;
      case PartitionForce::all_dense:
        dense[z] = true;
        break;
      case PartitionForce::cost_based:
        dense[z] = ev.score(z) > 0;  // tie goes sparse
        break;
    }
    if (dense[z])
      out.dense_z_count++;
    else
      out.sparse_z_count++;
  }
  out.f2_evaluations = ev.evaluations();

  // Dense side: one padded bitmap row per dense z, ascending z.
  std::uint64_t row_words = padded_bits(out.panel.y_card, c.w) / 64;
  if (budget != nullptr) budget->charge(out.dense_z_count * row_words * 8);
  out.panel.z_ids.reserve(out.dense_z_count);
  out.panel.blocks.assign(out.dense_z_count * row_words, 0);
  std::uint64_t sparse_nnz = 0;
  for (Code z = 0; z < n_z; ++z) {
    if (exclude != nullptr && (*exclude)[z]) continue;
    if (!dense[z]) {
      sparse_nnz += s_by_z.degree(z);
      continue;
    }
    std::size_t r = out.panel.z_ids.size();
    out.panel.z_ids.push_back(z);
    out.panel.m_z.push_back(stats.m_z[z]);
    std::uint64_t* row = out.panel.blocks.data() + r * row_words;
    for (Code y : s_by_z.row(z)) row[y >> 6] |= 1ull << (y & 63);
  }

  // Sparse side: counting transpose of the remaining rows into a y-major
  // CSR; z stays ascending within each y because z rows are visited in order.
  CsrMatrix& sp = out.s_sparse_by_y;
  sp.n_rows = s_by_z.n_cols;
  sp.n_cols = s_by_z.n_rows;
  sp.row_ptr.assign(static_cast<std::size_t>(sp.n_rows) + 1, 0);
  if (budget != nullptr)
    budget->charge(sparse_nnz * sizeof(Code) + sp.row_ptr.size() * 8);
  for (Code z = 0; z < n_z; ++z) {
    if (dense[z] || (exclude != nullptr && (*exclude)[z])) continue;
    for (Code y : s_by_z.row(z)) sp.row_ptr[y + 1]++;
  }
  for (std::size_t i = 1; i < sp.row_ptr.size(); ++i)
    sp.row_ptr[i] += sp.row_ptr[i - 1];
  sp.col.resize(sparse_nnz);
  std::vector<std::uint64_t> cursor(sp.row_ptr.begin(), sp.row_ptr.end() - 1);
  for (Code z = 0; z < n_z; ++z) {
    if (dense[z] || (exclude != nullptr && (*exclude)[z])) continue;
    for (Code y : s_by_z.row(z)) sp.col[cursor[y]++] = z;
  }
  return out;
}

PartitionResult partition_s(const MappedTable& s, const DegreeStats& stats,
                            const CostConstants& c, PartitionForce force,
                            MemoryBudget* budget) {
  CsrMatrix s_by_z = build_csr(s, /*major_is_a=*/true, budget);
  return partition_s_csr(s_by_z, stats, c, force, nullptr, budget);
}

}  // namespace dim3
