#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "dim3/costmodel.hpp"
#include "doctest.h"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out, err;
};

const fs::path& work_dir() {
  static fs::path dir = [] {
    auto d = fs::temp_directory_path() / "dim3_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CmdResult run(const std::string& args) {
  static int serial = 0;
  auto so = work_dir() / ("out" + std::to_string(serial) + ".txt");
  auto se = work_dir() / ("err" + std::to_string(serial) + ".txt");
  ++serial;
  std::string cmd = std::string(DIM3_CLI_PATH) + " " + args + " >" +
                    so.string() + " 2>" + se.string();
  int rc = std::system(cmd.c_str());
  CmdResult res;
  if (rc != -1 && WIFEXITED(rc)) res.code = WEXITSTATUS(rc);
  res.out = slurp(so);
  res.err = slurp(se);
  return res;
}

std::string first_line(const std::string& s) {
  return s.substr(0, s.find('\n'));
}

const std::string& consts_path() {
  static std::string path = [] {
    auto p = work_dir() / "test.consts";
    dim3::save_constants(p, testsup::test_consts());
    return p.string();
  }();
  return path;
}

const std::string& fixture_r() {
  static std::string path = [] {
    auto p = work_dir() / "fix_r.tsv";
    std::ofstream(p) << "1\t10\n1\t11\n2\t10\n";
    return p.string();
  }();
  return path;
}

const std::string& fixture_s() {
  static std::string path = [] {
    auto p = work_dir() / "fix_s.tsv";
    std::ofstream(p) << "5\t10\n6\t11\n6\t10\n";
    return p.string();
  }();
  return path;
}

std::string jp(const std::string& extra) {
  return "join-project " + fixture_r() + " " + fixture_s() + " --consts " +
         consts_path() + (extra.empty() ? "" : " " + extra);
}

}  // namespace

TEST_CASE("the fixture join counts four distinct pairs") {
  auto res = run(jp(""));
  REQUIRE(res.code == 0);
  CHECK(first_line(res.out) == "4");
  CHECK(res.out.find("strategy=") != std::string::npos);
  CHECK(res.out.find("out_p=4") != std::string::npos);

  for (const char* variant : {"--force classical", "--force hybrid",
                              "--force sparse", "--force dense",
                              "--threads 4"}) {
    auto v = run(jp(variant));
    REQUIRE(v.code == 0);
    CHECK(first_line(v.out) == "4");
  }
}

TEST_CASE("the json report carries the count and numeric fields") {
  auto res = run(jp("--json"));
  REQUIRE(res.code == 0);
  CHECK(res.out.find("\"count\": 4") != std::string::npos);
  CHECK(res.out.find("\"strategy\":") != std::string::npos);
  CHECK(res.out.find("\"out_p\": 4") != std::string::npos);
}

TEST_CASE("materialized pairs and report files land on disk") {
  auto pairs = work_dir() / "pairs.tsv";
  auto report = work_dir() / "report.txt";
  auto res =
      run(jp("--out " + pairs.string() + " --report " + report.string()));
  REQUIRE(res.code == 0);
  std::string content = slurp(pairs);
  CHECK(std::count(content.begin(), content.end(), '\n') == 4);
  CHECK(content.find("1\t5") != std::string::npos);
  CHECK(content.find("2\t6") != std::string::npos);
  CHECK(slurp(report).find("out_p=4") != std::string::npos);
}

TEST_CASE("count-only and out are mutually exclusive") {
  auto res = run(jp("--count-only --out " + (work_dir() / "x.tsv").string()));
  CHECK(res.code == 2);
}

TEST_CASE("the constants fall back to the environment variable") {
  std::string base = "join-project " + fixture_r() + " " + fixture_s();
  auto bare = run(base);
  CHECK(bare.code == 2);  // no --consts, no env

  auto so = work_dir() / "env_out.txt";
  std::string cmd = "DIM3_CONSTS=" + consts_path() + " " +
                    std::string(DIM3_CLI_PATH) + " " + base + " >" +
                    so.string() + " 2>/dev/null";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  CHECK(WEXITSTATUS(rc) == 0);
  CHECK(first_line(slurp(so)) == "4");
}

TEST_CASE("usage, io, and format failures map to their exit codes") {
  CHECK(run("join-project").code == 2);            // missing positionals
  CHECK(run("nonsense-subcommand").code == 2);     // unknown command
  CHECK(run(jp("--force warp")).code == 2);        // unknown strategy
  CHECK(run("join-project /nonexistent_r.tsv " + fixture_s() + " --consts " +
            consts_path())
            .code == 3);
  auto ragged = work_dir() / "ragged.tsv";
  std::ofstream(ragged) << "1\t2\n3\n";
  CHECK(run("join-project " + ragged.string() + " " + fixture_s() +
            " --consts " + consts_path())
            .code == 3);
  CHECK(run("bench --suite warp -o " + (work_dir() / "b.csv").string() +
            " --consts " + consts_path())
            .code == 2);
}

TEST_CASE("generation is deterministic and honors trivial domains") {
  auto a = work_dir() / "gen_a.tsv";
  auto b = work_dir() / "gen_b.tsv";
  CHECK(run("generate zipf --rows 500 --max 64 --alpha 0.9 --seed 12 -o " +
            a.string())
            .code == 0);
  CHECK(run("generate zipf --rows 500 --max 64 --alpha 0.9 --seed 12 -o " +
            b.string())
            .code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).find('\t') != std::string::npos);

  auto ones = work_dir() / "gen_ones.tsv";
  CHECK(run("generate uniform --rows 5 --max 1 --seed 1 -o " + ones.string())
            .code == 0);
  CHECK(slurp(ones) == "0\t0\n0\t0\n0\t0\n0\t0\n0\t0\n");

  CHECK(run("generate rmat --log2-n 4 --edges 10 --pa 0.9 --pb 0.9 --pc 0.1 "
            "--pd 0.1 --seed 1 -o " +
            (work_dir() / "gen_bad.tsv").string())
            .code == 2);
}

TEST_CASE("binary and text formats agree through the engine") {
  auto rt = work_dir() / "fmt_r.bin";
  auto st = work_dir() / "fmt_s.bin";
  REQUIRE(run("generate uniform --rows 800 --max 40 --seed 5 -o " +
              rt.string() + " --format binary")
              .code == 0);
  REQUIRE(run("generate uniform --rows 700 --max 40 --seed 6 -o " +
              st.string() + " --format binary")
              .code == 0);
  auto rtsv = work_dir() / "fmt_r.tsv";
  auto stsv = work_dir() / "fmt_s.tsv";
  REQUIRE(run("generate uniform --rows 800 --max 40 --seed 5 -o " +
              rtsv.string())
              .code == 0);
  REQUIRE(run("generate uniform --rows 700 --max 40 --seed 6 -o " +
              stsv.string())
              .code == 0);
  auto bin = run("join-project " + rt.string() + " " + st.string() +
                 " --consts " + consts_path());
  auto tsv = run("join-project " + rtsv.string() + " " + stsv.string() +
                 " --consts " + consts_path());
  REQUIRE(bin.code == 0);
  REQUIRE(tsv.code == 0);
  CHECK(first_line(bin.out) == first_line(tsv.out));
}

TEST_CASE("aggregates print counts and write hand-checkable rows") {
  auto rv = work_dir() / "val_r.tsv";
  auto sv = work_dir() / "val_s.tsv";
  std::ofstream(rv) << "1\t10\t2\n2\t10\t4\n";
  std::ofstream(sv) << "5\t10\t3\n";
  auto out = work_dir() / "agg_rows.tsv";
  auto res = run("aggregate " + rv.string() + " " + sv.string() +
                 " --consts " + consts_path() +
                 " --mode both --agg avg --combine multiply --out " +
                 out.string());
  REQUIRE(res.code == 0);
  CHECK(first_line(res.out) == "2");
  CHECK(slurp(out) == "1\t5\t6\n2\t5\t12\n");

  auto one = run("aggregate " + fixture_r() + " " + fixture_s() +
                 " --consts " + consts_path() + " --mode one --agg count");
  REQUIRE(one.code == 0);
  CHECK(first_line(one.out) == "2");  // two distinct x keys

  CHECK(run("aggregate " + rv.string() + " " + sv.string() + " --consts " +
            consts_path() + " --mode both --agg median")
            .code == 2);
  CHECK(run("aggregate " + rv.string() + " " + sv.string() + " --consts " +
            consts_path() + " --mode sideways --agg sum")
            .code == 2);
}

TEST_CASE("caching via the command line reproduces the plain count") {
  auto rt = work_dir() / "cache_r.tsv";
  auto st = work_dir() / "cache_s.tsv";
  REQUIRE(run("generate zipf --rows 4000 --max 300 --alpha 1 --seed 21 -o " +
              rt.string())
              .code == 0);
  REQUIRE(run("generate zipf --rows 4000 --max 300 --alpha 1 --seed 22 -o " +
              st.string())
              .code == 0);
  auto plain = run("join-project " + rt.string() + " " + st.string() +
                   " --consts " + consts_path());
  REQUIRE(plain.code == 0);

  auto store = work_dir() / "cli.cache";
  auto popu = run("join-project " + rt.string() + " " + st.string() +
                  " --consts " + consts_path() + " --cache-populate " +
                  "--cache-store " + store.string() + " --cache-budget 4000");
  REQUIRE(popu.code == 0);
  CHECK(popu.err.find("cached") != std::string::npos);
  CHECK(fs::exists(store));

  auto cached = run("join-project " + rt.string() + " " + st.string() +
                    " --consts " + consts_path() + " --cache-store " +
                    store.string());
  REQUIRE(cached.code == 0);
  CHECK(first_line(cached.out) == first_line(plain.out));
  CHECK(cached.out.find("cached_z=") != std::string::npos);

  // A different table invalidates the fingerprint: usage error.
  auto other = run("join-project " + fixture_r() + " " + fixture_s() +
                   " --consts " + consts_path() + " --cache-store " +
                   store.string());
  CHECK(other.code == 2);

  CHECK(run("join-project " + rt.string() + " " + st.string() + " --consts " +
            consts_path() + " --cache-populate --cache-store " +
            store.string())
            .code == 2);  // budget missing
}

TEST_CASE("chain plans run from a manifest") {
  auto t1 = work_dir() / "chain_t1.tsv";
  auto t2 = work_dir() / "chain_t2.tsv";
  std::ofstream(t1) << "1\t2\n1\t3\n";
  std::ofstream(t2) << "2\t5\n3\t5\n2\t6\n";
  auto man = work_dir() / "chain.man";
  std::ofstream(man) << "table=chain_t1.tsv\ntable=chain_t2.tsv\n";

  for (const char* strat : {"dp", "eager", "lazy"}) {
    auto res = run("plan-mjp " + man.string() + " --consts " + consts_path() +
                   " --strategy " + strat);
    REQUIRE(res.code == 0);
    CHECK(res.out.find("positions=2\n") != std::string::npos);
    CHECK(res.out.find("count=2\n") != std::string::npos);
  }

  auto bad = work_dir() / "chain_bad.man";
  std::ofstream(bad) << "table=chain_t1.tsv\n";
  CHECK(run("plan-mjp " + bad.string() + " --consts " + consts_path()).code ==
        3);
  CHECK(run("plan-mjp " + man.string() + " --consts " + consts_path() +
            " --strategy greedy")
            .code == 2);
}

TEST_CASE("calibration emits a complete constants file") {
  auto out = work_dir() / "quick.consts";
  auto res = run("calibrate --sample-mib 2 --runs 1 --ops 1048576 -o " +
                 out.string());
  REQUIRE(res.code == 0);
  auto c = dim3::load_constants(out);  // loader enforces all keys + version
  CHECK(c.t_seqR > 0);
  CHECK(c.t_randR >= c.t_seqR);
  CHECK(c.t_randRW >= c.t_randR);
  CHECK(res.out.find("version=1") != std::string::npos);
  CHECK(res.out.find("t_hash=") != std::string::npos);
}
