#include "dim3/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>

namespace dim3 {
namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
    return static_cast<std::size_t>(mix64(p.first ^ mix64(p.second)));
  }
};

double join_cost(double left, double table, double out,
                 const CostConstants& c) {
  return (left + table + out) * c.t_hash;
}

// Join i plus the dedup placed on its output: the cheaper of hash join +
// hash-set dedup and the mapped pipeline's linear form.
double jp_cost(double left, double table, double out_j,
               const CostConstants& c) {
  double classical = (left + table + out_j) * c.t_hash + out_j * c.t_hash;
  double hybrid = 2.0 * (left + table) * c.t_map +
                  (left + table + out_j) * c.t_hash + out_j * c.t_randRW;
  return std::min(classical, hybrid);
}

RawTable bag_to_table(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& bag) {
  RawTable t;
  t.left.ints.reserve(bag.size());
  t.right.ints.reserve(bag.size());
  for (auto [a, b] : bag) {
    t.left.push_int(a);
    t.right.push_int(b);
  }
  return t;
}

}  // namespace

void validate_chain_spec(const ChainSpec& spec) {
  std::size_t need = static_cast<std::size_t>(spec.k) + 1;
  if (spec.k < 2) throw ConfigError("chain needs at least two tables");
  if (spec.sizes.size() != need || spec.out_j.size() != need ||
      spec.out_p.size() != need)
    throw ConfigError("chain spec arrays must have k + 1 entries (1-based)");
  for (int i = 1; i <= spec.k; ++i) {
    if (!(spec.sizes[i] > 0)) throw ConfigError("chain table sizes must be positive");
    if (!(spec.out_p[i] > 0) || !(spec.out_j[i] > 0))
      throw ConfigError("chain cardinalities must be positive");
    if (spec.out_p[i] > spec.out_j[i])
      throw ConfigError("distinct count cannot exceed join count");
  }
}

double plan_cost(const ChainSpec& spec, const std::vector<int>& positions,
                 const CostConstants& c) {
  validate_chain_spec(spec);
  std::vector<bool> placed(static_cast<std::size_t>(spec.k) + 1, false);
  for (int p : positions) {
    if (p < 2 || p > spec.k) throw ConfigError("dedup position out of range");
    placed[p] = true;
  }
  if (!placed[spec.k]) throw ConfigError("the final join always deduplicates");

  double cost = 0;
  double rho = 1.0;  // ratio carried from the most recent dedup
  for (int h = 2; h <= spec.k; ++h) {
    double left = rho * spec.out_j[h - 1];
    double out = rho * spec.out_j[h];
    if (placed[h]) {
      cost += jp_cost(left, spec.sizes[h], out, c);
      rho = spec.out_p[h] / spec.out_j[h];
    } else {
      cost += join_cost(left, spec.sizes[h], out, c);
    }
  }
  return cost;
}

ChainPlan dp_plan(const ChainSpec& spec, const CostConstants& c) {
  validate_chain_spec(spec);
  int k = spec.k;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // dp[i]: cheapest prefix cost with the latest dedup sitting on join i.
  std::vector<double> dp(static_cast<std::size_t>(k) + 1, kInf);
  std::vector<int> parent(static_cast<std::size_t>(k) + 1, 1);
  dp[1] = 0;
  for (int i = 2; i <= k; ++i) {
    for (int j = 1; j < i; ++j) {
      double rho = spec.out_p[j] / spec.out_j[j];
      double cost = dp[j];
      for (int h = j + 1; h < i; ++h)
        cost += join_cost(rho * spec.out_j[h - 1], spec.sizes[h],
                          rho * spec.out_j[h], c);
      cost += jp_cost(rho * spec.out_j[i - 1], spec.sizes[i],
                      rho * spec.out_j[i], c);
      if (cost < dp[i]) {
        dp[i] = cost;
        parent[i] = j;
      }
    }
  }

  ChainPlan plan;
  plan.est_cost = dp[k];
  for (int i = k; i > 1; i = parent[i]) plan.dedup_positions.push_back(i);
  std::reverse(plan.dedup_positions.begin(), plan.dedup_positions.end());
  return plan;
}

ChainPlan eager_plan(const ChainSpec& spec, const CostConstants& c) {
  validate_chain_spec(spec);
  ChainPlan plan;
  for (int i = 2; i <= spec.k; ++i) plan.dedup_positions.push_back(i);
  plan.est_cost = plan_cost(spec, plan.dedup_positions, c);
  return plan;
}

ChainPlan lazy_plan(const ChainSpec& spec, const CostConstants& c) {
  validate_chain_spec(spec);
  ChainPlan plan;
  plan.dedup_positions.push_back(spec.k);
  plan.est_cost = plan_cost(spec, plan.dedup_positions, c);
  return plan;
}

ChainPlan make_plan(const ChainSpec& spec, PlanKind kind,
                    const CostConstants& c) {
  switch (kind) {
    case PlanKind::dp:
      return dp_plan(spec, c);
    case PlanKind::eager:
      return eager_plan(spec, c);
    case PlanKind::lazy:
      return lazy_plan(spec, c);
  }
  return dp_plan(spec, c);
}

ChainExecution execute_plan(const std::vector<RawTable>& tables,
                            const ChainPlan& plan, const EngineConfig& cfg,
                            const CostConstants& c) {
  auto t0 = std::chrono::steady_clock::now();
  int k = static_cast<int>(tables.size());
  if (k < 2) throw ConfigError("chain needs at least two tables");
  for (const auto& t : tables)
    if (t.left.type != ColumnType::u64 || t.right.type != ColumnType::u64)
      throw ConfigError("chain execution supports integer tables only");
  std::vector<bool> placed(static_cast<std::size_t>(k) + 1, false);
  for (int p : plan.dedup_positions) {
    if (p < 2 || p > k) throw ConfigError("dedup position out of range");
    placed[p] = true;
  }
  if (!placed[k]) throw ConfigError("the final join always deduplicates");

  ChainExecution exec;
  exec.plan = plan;
  EngineConfig step_cfg = cfg;
  step_cfg.count_only = false;

  std::vector<std::pair<std::uint64_t, std::uint64_t>> bag;
  bag.reserve(tables[0].size());
  for (std::size_t i = 0; i < tables[0].size(); ++i)
    bag.emplace_back(tables[0].left.ints[i], tables[0].right.ints[i]);

  MemoryBudget budget(cfg.memory_budget_bytes);
  for (int i = 2; i <= k; ++i) {
    const RawTable& t = tables[static_cast<std::size_t>(i) - 1];
    if (placed[i]) {
      // Measured pre-dedup size: sum of key multiplicities over the bag.
      std::unordered_map<std::uint64_t, std::uint64_t> deg;
      deg.reserve(t.size());
      for (std::uint64_t v : t.left.ints) deg[v]++;
      std::uint64_t out_j = 0;
      for (auto [a, b] : bag) {
        (void)a;
        auto it = deg.find(b);
        if (it != deg.end()) out_j += it->second;
      }
      exec.join_out.push_back(out_j);
      deg = {};
      // The engine joins on its tables' right columns and projects their
      // left columns, so the chain table enters with columns swapped.
      RawTable rbag = bag_to_table(bag);
      RawTable srel;
      srel.left = t.right;
      srel.right = t.left;
      JoinProjectOutput jp = join_project(rbag, srel, step_cfg, c);
      ResultSet raw = result_to_raw(jp);
      bag.clear();
      bag.reserve(raw.count);
      for (std::size_t e = 0; e < raw.raw_x.ints.size(); ++e)
        bag.emplace_back(raw.raw_x.ints[e], raw.raw_z.ints[e]);
    } else {
      budget.charge(t.size() * 24);
      std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> next_of;
      next_of.reserve(t.size());
      for (std::size_t e = 0; e < t.size(); ++e)
        next_of[t.left.ints[e]].push_back(t.right.ints[e]);
      std::vector<std::pair<std::uint64_t, std::uint64_t>> grown;
      for (auto [a, b] : bag) {
        auto it = next_of.find(b);
        if (it == next_of.end()) continue;
        for (std::uint64_t v : it->second) {
          grown.emplace_back(a, v);
          if (grown.size() % 65536 == 0) budget.charge(65536 * 16);
        }
      }
      exec.join_out.push_back(grown.size());
      bag = std::move(grown);
      budget.release(t.size() * 24);
    }
  }

  exec.result.provenance = ResultSet::Provenance::raw;
  exec.result.materialized = true;
  exec.result.count = bag.size();
  for (auto [a, b] : bag) {
    exec.result.raw_x.push_int(a);
    exec.result.raw_z.push_int(b);
  }
  exec.ms_total = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  return exec;
}

ChainSpec chain_spec_from_tables(const std::vector<RawTable>& tables) {
  int k = static_cast<int>(tables.size());
  if (k < 2) throw ConfigError("chain needs at least two tables");
  for (const auto& t : tables)
    if (t.left.type != ColumnType::u64 || t.right.type != ColumnType::u64)
      throw ConfigError("chain statistics support integer tables only");

  ChainSpec spec;
  spec.k = k;
  spec.sizes.assign(static_cast<std::size_t>(k) + 1, 0);
  spec.out_j.assign(static_cast<std::size_t>(k) + 1, 0);
  spec.out_p.assign(static_cast<std::size_t>(k) + 1, 0);
  for (int i = 1; i <= k; ++i)
    spec.sizes[i] = static_cast<double>(tables[static_cast<std::size_t>(i) - 1].size());
  spec.out_j[1] = spec.out_p[1] = spec.sizes[1];

  // Exact bag statistics: (x_1, frontier) -> multiplicity, no dedup applied,
  // so out_j is the plain chain's join size and out_p its distinct count.
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t,
                     PairHash>
      cur;
  for (std::size_t e = 0; e < tables[0].size(); ++e)
    cur[{tables[0].left.ints[e], tables[0].right.ints[e]}]++;

  for (int i = 2; i <= k; ++i) {
    const RawTable& t = tables[static_cast<std::size_t>(i) - 1];
    std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> next_of;
    for (std::size_t e = 0; e < t.size(); ++e)
      next_of[t.left.ints[e]].push_back(t.right.ints[e]);
    std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t,
                       PairHash>
        next;
    double total = 0;
    for (const auto& [key, count] : cur) {
      auto it = next_of.find(key.second);
      if (it == next_of.end()) continue;
      for (std::uint64_t v : it->second) {
        next[{key.first, v}] += count;
        total += static_cast<double>(count);
      }
    }
    // Empty joins make the ratio model degenerate; clamp to the smallest
    // positive spec so planning still returns something executable.
    spec.out_j[i] = total > 0 ? total : 1;
    spec.out_p[i] = next.empty() ? 1 : static_cast<double>(next.size());
    cur = std::move(next);
  }
  return spec;
}

ChainManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  ChainManifest m;
  std::string line;
  std::size_t lineno = 0;
  auto parse_list = [&](const std::string& v) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
      std::size_t comma = v.find(',', pos);
      std::string item = v.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        std::size_t used = 0;
        double d = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(d);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) +
                          ": bad number '" + item + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    std::size_t eq = line.find('=', start);
    if (eq == std::string::npos)
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key=value");
    std::string key = line.substr(start, eq - start);
    std::string value = line.substr(eq + 1);
    if (key == "table") {
      std::filesystem::path p(value);
      if (p.is_relative()) p = path.parent_path() / p;
      m.tables.push_back(std::move(p));
    }
    else if (key == "out_j")
      m.out_j = parse_list(value);
    else if (key == "out_p")
      m.out_p = parse_list(value);
    else
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
  }
  if (m.tables.size() < 2)
    throw FormatError(path.string() + ": manifest needs at least two tables");
  if (m.out_j.empty() != m.out_p.empty())
    throw FormatError(path.string() +
                      ": out_j and out_p overrides come as a pair");
  if (!m.out_j.empty() && (m.out_j.size() != m.tables.size() - 1 ||
                           m.out_p.size() != m.tables.size() - 1))
    throw FormatError(path.string() +
                      ": overrides need one value per join (k - 1)");
  return m;
}

}  // namespace dim3
