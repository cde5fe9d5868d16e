#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "dim3/denseec.hpp"
#include "dim3/mapping.hpp"
#include "dim3/partition.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dim3;

namespace {

struct Fixture {
  MappingOutput m;
  CsrMatrix r_by_x, s_by_z;
  DegreeStats stats;
  PartitionResult pr;
};

Fixture prepare(const testsup::Instance& inst, PartitionForce force) {
  Fixture f;
  f.m = map_tables(inst.r, inst.s);
  f.r_by_x = build_csr(f.m.r, true);
  f.s_by_z = build_csr(f.m.s, true);
  f.stats = compute_degree_stats(f.r_by_x, f.s_by_z);
  f.pr = partition_s_csr(f.s_by_z, f.stats, testsup::test_consts(), force);
  return f;
}

// Reference: x ascending, panel order within x, pair present iff the y sets
// intersect.
std::vector<std::pair<Code, Code>> reference_emission(const CsrMatrix& r_by_x,
                                                      const BitmapPanel& panel) {
  std::vector<std::pair<Code, Code>> out;
  for (Code x = 0; x < r_by_x.n_rows; ++x) {
    auto ys = r_by_x.row(x);
    for (std::size_t i = 0; i < panel.rows(); ++i) {
      bool hit = false;
      for (Code y : ys)
        if (panel.test(i, y)) {
          hit = true;
          break;
        }
      if (hit) out.emplace_back(x, panel.z_ids[i]);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("dense kernel answers every encounter correctly") {
  dim3::SplitMix64 rng{301};
  for (int it = 0; it < 12; ++it) {
    auto f = prepare(testsup::random_instance(rng, 128, 2000),
                     PartitionForce::all_dense);
    auto want = reference_emission(f.r_by_x, f.pr.panel);

    std::vector<std::pair<Code, Code>> got;
    DenseEcStats st;
    std::uint64_t n = dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(),
                               {}, &got, &st);
    CHECK(n == want.size());
    CHECK(got == want);

    std::uint64_t live_rows = 0;
    for (Code x = 0; x < f.r_by_x.n_rows; ++x)
      if (f.r_by_x.degree(x) > 0) ++live_rows;
    CHECK(st.wide_encounters + st.probe_encounters ==
          live_rows * f.pr.panel.rows());
    CHECK(st.blocks_checked >= st.wide_encounters);
    CHECK(st.probes_done >= st.probe_encounters);
    CHECK(st.threshold_memo_misses <= f.r_by_x.n_rows);
  }
}

TEST_CASE("both answer paths give identical pairs") {
  dim3::SplitMix64 rng{302};
  for (int it = 0; it < 8; ++it) {
    auto f = prepare(testsup::random_instance(rng, 96, 1500),
                     PartitionForce::all_dense);
    std::vector<std::pair<Code, Code>> wide, probe, costed;
    DenseOptions ow, op;
    ow.mode = DensePathMode::force_wide;
    op.mode = DensePathMode::force_probe;
    DenseEcStats sw, sp;
    dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(), ow, &wide, &sw);
    dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(), op, &probe, &sp);
    dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(), {}, &costed);
    CHECK(wide == probe);
    CHECK(wide == costed);
    CHECK(sw.probe_encounters == 0);
    CHECK(sp.wide_encounters == 0);
    CHECK(sp.row_bitmaps_built == 0);  // scalar path never builds row bitmaps
  }
}

TEST_CASE("wide path probes whole blocks with early stop") {
  dim3::SplitMix64 rng{303};
  auto f = prepare(testsup::random_instance(rng, 64, 1500),
                   PartitionForce::all_dense);
  DenseOptions ow;
  ow.mode = DensePathMode::force_wide;
  DenseEcStats st;
  dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(), ow, nullptr, &st);
  std::uint64_t blocks_per_row =
      padded_bits(f.pr.panel.y_card, f.pr.panel.w) / f.pr.panel.w;
  CHECK(st.blocks_checked <= st.wide_encounters * blocks_per_row);
  std::uint64_t live_rows = 0;
  for (Code x = 0; x < f.r_by_x.n_rows; ++x)
    if (f.r_by_x.degree(x) > 0) ++live_rows;
  CHECK(st.row_bitmaps_built == (f.pr.panel.rows() > 0 ? live_rows : 0));
}

TEST_CASE("threads do not change the emission") {
  dim3::SplitMix64 rng{304};
  for (int it = 0; it < 6; ++it) {
    auto f = prepare(testsup::random_instance(rng, 128, 2500),
                     PartitionForce::all_dense);
    std::vector<std::pair<Code, Code>> one, four;
    DenseOptions o4;
    o4.threads = 4;
    dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(), {}, &one);
    dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(), o4, &four);
    CHECK(one == four);
  }
}

TEST_CASE("per-z instrumentation sums to the totals") {
  dim3::SplitMix64 rng{305};
  auto f = prepare(testsup::random_instance(rng, 80, 1200),
                   PartitionForce::all_dense);
  Code zc = f.m.s.a_card;
  std::vector<std::uint64_t> wide(zc, 0), probes(zc, 0), results(zc, 0);
  DenseOptions opt;
  opt.threads = 4;
  opt.z_wide_checks = &wide;
  opt.z_probe_checks = &probes;
  opt.z_results = &results;
  DenseEcStats st;
  std::uint64_t n =
      dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(), opt, nullptr, &st);
  CHECK(std::accumulate(wide.begin(), wide.end(), std::uint64_t{0}) ==
        st.blocks_checked);
  CHECK(std::accumulate(probes.begin(), probes.end(), std::uint64_t{0}) ==
        st.probes_done);
  CHECK(std::accumulate(results.begin(), results.end(), std::uint64_t{0}) == n);
}

TEST_CASE("count-only agrees and an empty panel emits nothing") {
  dim3::SplitMix64 rng{306};
  auto f = prepare(testsup::random_instance(rng, 96, 1500),
                   PartitionForce::all_dense);
  std::vector<std::pair<Code, Code>> got;
  std::uint64_t with_out =
      dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts(), {}, &got);
  CHECK(dense_ec(f.r_by_x, f.pr.panel, testsup::test_consts()) == with_out);
  CHECK(got.size() == with_out);

  BitmapPanel empty;
  empty.y_card = f.pr.panel.y_card;
  CHECK(dense_ec(f.r_by_x, empty, testsup::test_consts()) == 0);
}
