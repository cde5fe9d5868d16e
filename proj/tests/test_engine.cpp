#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dim3/engine.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dim3;

namespace {

EngineConfig forced(Strategy s, int threads = 1) {
  EngineConfig cfg;
  cfg.force = s;
  cfg.threads = threads;
  return cfg;
}

testsup::PairSet run_pairs(const RawTable& r, const RawTable& s,
                           const EngineConfig& cfg) {
  auto out = join_project(r, s, cfg, testsup::test_consts());
  auto raw = result_to_raw(out);
  CHECK(raw.count == out.report.out_p);
  auto set = testsup::result_set(raw);
  CHECK(set.size() == raw.count);
  return set;
}

ValuedTable attach_values(const RawTable& t, dim3::SplitMix64& rng) {
  ValuedTable v;
  v.base = t;
  v.values.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    v.values.push_back(rng.unit() * 10.0 - 5.0);
  return v;
}

struct OracleCell {
  double sum = 0, mn = 0, mx = 0;
  std::uint64_t cnt = 0;
  void add(double v) {
    if (cnt == 0) {
      mn = mx = v;
    } else {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    sum += v;
    cnt++;
  }
  double get(AggFn a) const {
    switch (a) {
      case AggFn::sum:
        return sum;
      case AggFn::count:
        return static_cast<double>(cnt);
      case AggFn::min:
        return mn;
      case AggFn::max:
        return mx;
      default:
        return sum / static_cast<double>(cnt);
    }
  }
};

double combine_oracle(CombineFn f, double a, double b) {
  switch (f) {
    case CombineFn::multiply:
      return a * b;
    case CombineFn::add:
      return a + b;
    case CombineFn::abs_diff:
      return std::fabs(a - b);
    case CombineFn::left:
      return a;
    default:
      return b;
  }
}

}  // namespace

TEST_CASE("every forced strategy and thread count matches the oracle") {
  dim3::SplitMix64 rng{501};
  const Strategy forces[] = {Strategy::classical, Strategy::hybrid,
                             Strategy::sparse_only, Strategy::dense_only};
  for (int it = 0; it < 8; ++it) {
    auto inst = testsup::random_instance(rng, 128, 2000);
    auto want = testsup::oracle_pairs(inst.r, inst.s);
    for (Strategy f : forces)
      for (int threads : {1, 4})
        CHECK(run_pairs(inst.r, inst.s, forced(f, threads)) == want);
  }
}

TEST_CASE("auto selection stays correct wherever it lands") {
  dim3::SplitMix64 rng{502};
  for (int it = 0; it < 10; ++it) {
    auto inst = testsup::random_instance(rng, 128, 2500);
    auto want = testsup::oracle_pairs(inst.r, inst.s);
    auto out = join_project(inst.r, inst.s, forced(Strategy::auto_select),
                            testsup::test_consts());
    CHECK(testsup::result_set(result_to_raw(out)) == want);
    CHECK((out.report.strategy == "classical" ||
           out.report.strategy == "hybrid"));
  }
}

TEST_CASE("forced strategies are named in the report") {
  dim3::SplitMix64 rng{503};
  auto inst = testsup::random_instance(rng, 64, 800);
  auto c = testsup::test_consts();
  CHECK(join_project(inst.r, inst.s, forced(Strategy::classical), c)
            .report.strategy == "classical");
  CHECK(join_project(inst.r, inst.s, forced(Strategy::hybrid), c)
            .report.strategy == "hybrid");
  auto sp = join_project(inst.r, inst.s, forced(Strategy::sparse_only), c);
  CHECK(sp.report.strategy == "sparse");
  CHECK(sp.report.dense_z == 0);
  auto de = join_project(inst.r, inst.s, forced(Strategy::dense_only), c);
  CHECK(de.report.strategy == "dense");
  CHECK(de.report.sparse_z == 0);
}

TEST_CASE("the larger input becomes the probe side but the output keeps caller orientation") {
  RawTable small, big;
  small.left.ints = {1, 2};
  small.right.ints = {10, 11};
  for (std::uint64_t i = 0; i < 100; ++i) {
    big.left.ints.push_back(100 + i);
    big.right.ints.push_back(10 + i % 2);
  }
  CHECK(engine_will_swap(small, big));
  CHECK_FALSE(engine_will_swap(big, small));
  CHECK_FALSE(engine_will_swap(small, small));

  auto want = testsup::oracle_pairs(small, big);
  for (Strategy f : {Strategy::classical, Strategy::hybrid}) {
    auto out = join_project(small, big, forced(f), testsup::test_consts());
    CHECK(out.report.swapped);
    CHECK(testsup::result_set(result_to_raw(out)) == want);
  }
}

TEST_CASE("count-only reports the count without materializing") {
  dim3::SplitMix64 rng{504};
  auto inst = testsup::random_instance(rng, 96, 1500);
  auto want = testsup::oracle_pairs(inst.r, inst.s);
  for (Strategy f : {Strategy::classical, Strategy::hybrid}) {
    auto cfg = forced(f);
    cfg.count_only = true;
    auto out = join_project(inst.r, inst.s, cfg, testsup::test_consts());
    CHECK(out.report.out_p == want.size());
    CHECK_FALSE(out.result.materialized);
    CHECK(out.result.code_pairs.empty());
    CHECK(out.result.raw_x.size() == 0);
  }
}

TEST_CASE("natural keys and declared skips leave results intact") {
  RawTable r, s;
  for (std::uint64_t i = 0; i < 400; ++i) {
    r.left.ints.push_back(i % 37);
    r.right.ints.push_back(i % 23);
    s.left.ints.push_back(i % 31);
    s.right.ints.push_back(i % 23);
  }
  auto want = testsup::oracle_pairs(r, s);

  auto cfg = forced(Strategy::hybrid);
  CHECK(run_pairs(r, s, cfg) == want);

  cfg.natural_keys_auto = false;
  CHECK(run_pairs(r, s, cfg) == want);

  cfg.natural_keys_declared = {true, true, true};
  CHECK(run_pairs(r, s, cfg) == want);

  RawTable huge = r;
  huge.left.ints[0] = 1ull << 33;
  CHECK_THROWS_AS(
      join_project(huge, s, cfg, testsup::test_consts()),
      ConfigError);
}

TEST_CASE("cache stats cover every z and sum to the emitted pairs") {
  dim3::SplitMix64 rng{505};
  auto inst = testsup::random_instance(rng, 80, 1200);
  auto cfg = forced(Strategy::hybrid);
  cfg.collect_cache_stats = true;
  auto out = join_project(inst.r, inst.s, cfg, testsup::test_consts());
  REQUIRE(out.z_stats.has_value());
  auto& zs = *out.z_stats;
  std::uint64_t zc = out.report.z_card;
  CHECK(zs.n_sparse.size() == zc);
  CHECK(zs.n_simd.size() == zc);
  CHECK(zs.n_nonsimd.size() == zc);
  CHECK(zs.k.size() == zc);
  std::uint64_t k_total = 0;
  for (auto v : zs.k) k_total += v;
  CHECK(k_total == out.report.pairs_sparse + out.report.pairs_dense);
}

TEST_CASE("excluded columns drop out and prepended pairs come back first") {
  dim3::SplitMix64 rng{506};
  auto inst = testsup::random_instance(rng, 64, 1000);
  auto cfg = forced(Strategy::hybrid);
  auto base = join_project(inst.r, inst.s, cfg, testsup::test_consts());
  REQUIRE(base.mapping.has_value());
  bool swapped = base.report.swapped;
  Code zc = static_cast<Code>(base.report.z_card);
  if (zc < 2) return;

  // result.code_pairs are caller-oriented; the extras want engine codes.
  Code victim = zc / 2;
  std::vector<std::pair<Code, Code>> prepend;
  for (auto [cx, cz] : base.result.code_pairs) {
    Code ex = swapped ? cz : cx;
    Code ez = swapped ? cx : cz;
    if (ez == victim) prepend.emplace_back(ex, ez);
  }
  std::vector<bool> exclude(zc, false);
  exclude[victim] = true;
  HybridExtras extras;
  extras.exclude_z = &exclude;
  extras.prepend_pairs = &prepend;
  extras.cached_z = 1;
  auto out = join_project_extended(inst.r, inst.s, cfg, testsup::test_consts(),
                                   &extras);
  CHECK(out.report.cached_z == 1);
  CHECK(out.report.pairs_cached == prepend.size());
  CHECK(testsup::result_set(result_to_raw(out)) ==
        testsup::result_set(result_to_raw(base)));

  // Dropping the column without replaying it removes exactly its pairs.
  HybridExtras drop;
  drop.exclude_z = &exclude;
  auto partial = join_project_extended(inst.r, inst.s, cfg,
                                       testsup::test_consts(), &drop);
  auto want = testsup::result_set(result_to_raw(base));
  for (auto [ex, ez] : prepend) {
    Code cx = swapped ? ez : ex;
    Code cz = swapped ? ex : ez;
    want.erase({base.x_dict()->int_value(cx), base.z_dict()->int_value(cz)});
  }
  CHECK(testsup::result_set(result_to_raw(partial)) == want);

  std::vector<bool> wrong(zc + 1, false);
  HybridExtras bad;
  bad.exclude_z = &wrong;
  CHECK_THROWS_AS(join_project_extended(inst.r, inst.s, cfg,
                                        testsup::test_consts(), &bad),
                  ConfigError);
}

TEST_CASE("the memory budget caps the run") {
  RawTable r, s;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    r.left.ints.push_back(i % 3000);
    r.right.ints.push_back(i % 200);
    s.left.ints.push_back(i % 3000);
    s.right.ints.push_back(i % 200);
  }
  auto cfg = forced(Strategy::hybrid);
  cfg.memory_budget_bytes = 1024;
  CHECK_THROWS_AS(join_project(r, s, cfg, testsup::test_consts()),
                  ResourceError);

  cfg.memory_budget_bytes = 3ull << 30;
  auto out = join_project(r, s, cfg, testsup::test_consts());
  CHECK(out.report.peak_bytes > 0);
  CHECK(out.report.peak_bytes <= cfg.memory_budget_bytes);
}

TEST_CASE("bad configuration is rejected up front") {
  RawTable r;
  r.left.ints = {1};
  r.right.ints = {2};
  auto cfg = forced(Strategy::classical);
  cfg.threads = 0;
  CHECK_THROWS_AS(join_project(r, r, cfg, testsup::test_consts()), ConfigError);
}

TEST_CASE("the report serializes with a stable key order") {
  dim3::SplitMix64 rng{507};
  auto inst = testsup::random_instance(rng, 64, 800);
  auto out =
      join_project(inst.r, inst.s, forced(Strategy::hybrid), testsup::test_consts());
  auto kv = out.report.to_kv();
  REQUIRE(kv.size() > 10);
  CHECK(kv[0].first == "strategy");
  CHECK(kv[1].first == "swapped");
  std::set<std::string> keys;
  for (auto& [k, v] : kv) {
    (void)v;
    CHECK(keys.insert(k).second);  // no duplicate keys
  }
  for (const char* k : {"out_p", "sparse_z", "dense_z", "peak_bytes",
                        "f2_evaluations", "ms_total"})
    CHECK(keys.count(k) == 1);
}

TEST_CASE("two-sided aggregates match the brute force for every function pair") {
  dim3::SplitMix64 rng{508};
  const AggFn aggs[] = {AggFn::sum, AggFn::count, AggFn::min, AggFn::max,
                        AggFn::avg};
  const CombineFn combines[] = {CombineFn::multiply, CombineFn::add,
                                CombineFn::abs_diff, CombineFn::left,
                                CombineFn::right};
  for (int it = 0; it < 4; ++it) {
    auto inst = testsup::random_instance(rng, 48, 600);
    auto r = attach_values(inst.r, rng);
    auto s = attach_values(inst.s, rng);

    for (CombineFn cf : combines) {
      std::map<testsup::Pair, OracleCell> want;
      for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
          if (r.base.right.ints[i] == s.base.right.ints[j])
            want[{r.base.left.ints[i], s.base.left.ints[j]}].add(
                combine_oracle(cf, r.values[i], s.values[j]));

      for (AggFn af : aggs) {
        auto res = join_aggregate_both(r, s, cf, af, EngineConfig{},
                                       testsup::test_consts());
        CHECK(res.report.strategy == "hybrid");
        auto raw = aggregate_to_raw(res);
        REQUIRE(raw.count == want.size());
        for (std::size_t i = 0; i < raw.count; ++i) {
          auto it2 = want.find({raw.raw_x.ints[i], raw.raw_z.ints[i]});
          REQUIRE(it2 != want.end());
          double expect = it2->second.get(af);
          if (af == AggFn::count)
            CHECK(res.values[i] == expect);
          else
            CHECK(res.values[i] ==
                  doctest::Approx(expect).epsilon(1e-9).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("two-sided aggregates reject the classical force") {
  dim3::SplitMix64 rng{509};
  auto inst = testsup::random_instance(rng, 32, 200);
  auto r = attach_values(inst.r, rng);
  auto s = attach_values(inst.s, rng);
  auto cfg = forced(Strategy::classical);
  CHECK_THROWS_AS(join_aggregate_both(r, s, CombineFn::add, AggFn::sum, cfg,
                                      testsup::test_consts()),
                  ConfigError);
}

TEST_CASE("one-sided aggregates group by x over the joined z column") {
  dim3::SplitMix64 rng{510};
  const AggFn aggs[] = {AggFn::sum, AggFn::count, AggFn::min, AggFn::max,
                        AggFn::avg};
  for (int it = 0; it < 6; ++it) {
    auto inst = testsup::random_instance(rng, 64, 800);
    std::map<std::uint64_t, OracleCell> want;
    for (std::size_t i = 0; i < inst.r.size(); ++i)
      for (std::size_t j = 0; j < inst.s.size(); ++j)
        if (inst.r.right.ints[i] == inst.s.right.ints[j])
          want[inst.r.left.ints[i]].add(
              static_cast<double>(inst.s.left.ints[j]));

    for (AggFn af : aggs) {
      auto res = join_aggregate_one(inst.r, inst.s, af, EngineConfig{},
                                    testsup::test_consts());
      REQUIRE(res.keys.size() == want.size());
      for (std::size_t i = 0; i < res.keys.size(); ++i) {
        auto it2 = want.find(res.keys.ints[i]);
        REQUIRE(it2 != want.end());
        double expect = it2->second.get(af);
        if (af == AggFn::count)
          CHECK(res.values[i] == expect);
        else
          CHECK(res.values[i] ==
                doctest::Approx(expect).epsilon(1e-9).scale(1.0));
      }
    }
  }
}

TEST_CASE("one-sided aggregate rejects non-numeric z except for count") {
  RawTable r, s;
  r.left.ints = {1};
  r.right.ints = {10};
  s.left.type = ColumnType::bytes;
  s.left.strs = {"zed"};
  s.right.ints = {10};
  CHECK_THROWS_AS(join_aggregate_one(r, s, AggFn::sum, EngineConfig{},
                                     testsup::test_consts()),
                  ConfigError);
  auto res = join_aggregate_one(r, s, AggFn::count, EngineConfig{},
                                testsup::test_consts());
  REQUIRE(res.keys.size() == 1);
  CHECK(res.values[0] == 1.0);
}
