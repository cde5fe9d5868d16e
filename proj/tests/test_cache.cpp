#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "dim3/cache.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dim3;

namespace {

EngineConfig instrumented() {
  EngineConfig cfg;
  cfg.force = Strategy::hybrid;
  cfg.collect_cache_stats = true;
  return cfg;
}

}  // namespace

TEST_CASE("entry encoding stores whichever side is smaller") {
  std::vector<Code> small = {3, 7, 9};
  auto e = encode_entry(5, small, 100);
  CHECK(e.z == 5);
  CHECK(e.size == 3);
  CHECK(e.ids == small);
  CHECK(decode_entry(e, 100) == small);

  // 97 of 100 partners: the 3 absentees are cheaper.
  std::vector<Code> big;
  for (Code x = 0; x < 100; ++x)
    if (x != 3 && x != 7 && x != 9) big.push_back(x);
  auto ec = encode_entry(6, big, 100);
  CHECK(ec.size == -3);
  CHECK(ec.ids == small);
  CHECK(decode_entry(ec, 100) == big);

  // A full column is an empty complement, the only size == 0 shape.
  std::vector<Code> full(100);
  for (Code x = 0; x < 100; ++x) full[x] = x;
  auto ef = encode_entry(7, full, 100);
  CHECK(ef.size == 0);
  CHECK(ef.ids.empty());
  CHECK(decode_entry(ef, 100) == full);
}

TEST_CASE("random partner sets round trip through the encoding") {
  dim3::SplitMix64 rng{601};
  for (int it = 0; it < 200; ++it) {
    Code x_card = 1 + static_cast<Code>(rng.bounded(300));
    std::set<Code> chosen;
    std::uint64_t want = 1 + rng.bounded(x_card);
    while (chosen.size() < want) chosen.insert(static_cast<Code>(rng.bounded(x_card)));
    std::vector<Code> xs(chosen.begin(), chosen.end());
    auto e = encode_entry(0, xs, x_card);
    CHECK(static_cast<std::uint64_t>(e.ids.size()) ==
          std::min<std::uint64_t>(xs.size(), x_card - xs.size()));
    CHECK(decode_entry(e, x_card) == xs);
  }
}

TEST_CASE("the score prefers expensive columns with small footprints") {
  auto c = testsup::test_consts();
  double costly = cache_score(1000, 0, 0, 4, 100, c);
  double cheap = cache_score(10, 0, 0, 4, 100, c);
  CHECK(costly > cheap);
  // Same avoided work, bigger footprint, lower score; complements cap it.
  CHECK(cache_score(1000, 0, 0, 40, 100, c) <
        cache_score(1000, 0, 0, 4, 100, c));
  CHECK(cache_score(1000, 0, 0, 96, 100, c) ==
        cache_score(1000, 0, 0, 4, 100, c));
  // The avoided cost weights each operation class by its constant.
  double sparse_only = cache_score(100, 0, 0, 4, 100, c);
  double manual = 100.0 * (c.t_seqR + c.t_randRW) / (2 + 4);
  CHECK(sparse_only == doctest::Approx(manual));
}

TEST_CASE("population is greedy by score and stops at the budget") {
  dim3::SplitMix64 rng{602};
  auto inst = testsup::random_instance(rng, 96, 1500);
  auto run = join_project(inst.r, inst.s, instrumented(), testsup::test_consts());
  REQUIRE(run.z_stats.has_value());
  std::uint64_t fp = table_fingerprint(inst.r, inst.s);

  auto all = populate_cache(run, std::uint64_t(-1), fp, testsup::test_consts());
  CHECK(all.fingerprint == fp);
  // Only columns that produced pairs are cacheable.
  std::uint64_t nonzero = 0;
  for (auto k : run.z_stats->k) nonzero += k > 0 ? 1 : 0;
  CHECK(all.entries.size() == nonzero);

  auto c = testsup::test_consts();
  auto score_of = [&](const CacheEntry& e) {
    auto& zs = *run.z_stats;
    return cache_score(zs.n_sparse[e.z], zs.n_simd[e.z], zs.n_nonsimd[e.z],
                       zs.k[e.z], all.x_card, c);
  };
  for (std::size_t i = 1; i < all.entries.size(); ++i)
    CHECK(score_of(all.entries[i - 1]) >= score_of(all.entries[i]));

  if (all.entries.size() >= 2) {
    std::uint64_t budget =
        all.entries[0].space_units() + all.entries[1].space_units();
    auto some = populate_cache(run, budget, fp, testsup::test_consts());
    CHECK(some.space_units() <= budget);
    REQUIRE(some.entries.size() >= 2);
    CHECK(some.entries[0].z == all.entries[0].z);
    CHECK(some.entries[1].z == all.entries[1].z);
  }

  auto none = populate_cache(run, 0, fp, testsup::test_consts());
  CHECK(none.entries.empty());
}

TEST_CASE("cached and uncached runs give identical results") {
  dim3::SplitMix64 rng{603};
  for (int it = 0; it < 8; ++it) {
    auto inst = testsup::random_instance(rng, 96, 1500);
    auto run =
        join_project(inst.r, inst.s, instrumented(), testsup::test_consts());
    std::uint64_t fp = table_fingerprint(inst.r, inst.s);
    auto store = populate_cache(run, std::uint64_t(-1), fp, testsup::test_consts());

    EngineConfig cfg;  // auto: the cached path must force hybrid itself
    auto cached = join_project_with_cache(inst.r, inst.s, store, cfg,
                                          testsup::test_consts());
    CHECK(cached.report.cached_z == store.entries.size());
    CHECK(cached.report.pairs_cached + cached.report.pairs_sparse +
              cached.report.pairs_dense ==
          run.report.out_p);
    CHECK(testsup::result_set(result_to_raw(cached)) ==
          testsup::result_set(result_to_raw(run)));
  }
}

TEST_CASE("the cached path rejects a classical force and stale stores") {
  dim3::SplitMix64 rng{604};
  auto inst = testsup::random_instance(rng, 64, 900);
  auto run = join_project(inst.r, inst.s, instrumented(), testsup::test_consts());
  auto store = populate_cache(run, std::uint64_t(-1),
                              table_fingerprint(inst.r, inst.s),
                              testsup::test_consts());

  EngineConfig classical;
  classical.force = Strategy::classical;
  CHECK_THROWS_AS(join_project_with_cache(inst.r, inst.s, store, classical,
                                          testsup::test_consts()),
                  ConfigError);

  auto tampered = inst;
  tampered.r.left.ints[0] ^= 1;
  CHECK_THROWS_AS(join_project_with_cache(tampered.r, tampered.s, store,
                                          EngineConfig{}, testsup::test_consts()),
                  CacheInvalidError);
}

TEST_CASE("the fingerprint sees every byte of both tables") {
  dim3::SplitMix64 rng{605};
  auto inst = testsup::random_instance(rng, 64, 500);
  std::uint64_t fp = table_fingerprint(inst.r, inst.s);
  CHECK(fp == table_fingerprint(inst.r, inst.s));
  CHECK(fp != table_fingerprint(inst.s, inst.r));

  auto mod = inst;
  mod.s.right.ints.back() += 1;
  CHECK(fp != table_fingerprint(mod.r, mod.s));

  RawTable str_r, str_s;
  str_r.left.type = ColumnType::bytes;
  str_r.left.strs = {"ab", "c"};
  str_r.right.ints = {1, 2};
  str_s = str_r;
  RawTable shifted = str_r;
  shifted.left.strs = {"a", "bc"};  // same bytes, different cell boundaries
  CHECK(table_fingerprint(str_r, str_s) != table_fingerprint(shifted, str_s));
}

TEST_CASE("stores survive the binary file format") {
  dim3::SplitMix64 rng{606};
  auto inst = testsup::random_instance(rng, 96, 1200);
  auto run = join_project(inst.r, inst.s, instrumented(), testsup::test_consts());
  auto store = populate_cache(run, std::uint64_t(-1),
                              table_fingerprint(inst.r, inst.s),
                              testsup::test_consts());

  auto path = std::filesystem::temp_directory_path() / "dim3_cache_rt.bin";
  save_cache(store, path);
  auto back = load_cache(path);
  CHECK(back.fingerprint == store.fingerprint);
  CHECK(back.x_card == store.x_card);
  CHECK(back.z_card == store.z_card);
  REQUIRE(back.entries.size() == store.entries.size());
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].z == store.entries[i].z);
    CHECK(back.entries[i].size == store.entries[i].size);
    CHECK(back.entries[i].ids == store.entries[i].ids);
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_cache("/nonexistent/cache.bin"), IoError);
  auto trunc = std::filesystem::temp_directory_path() / "dim3_cache_trunc.bin";
  std::ofstream(trunc, std::ios::binary) << "\x01\x02\x03";
  CHECK_THROWS_AS(load_cache(trunc), FormatError);
  std::filesystem::remove(trunc);
}
