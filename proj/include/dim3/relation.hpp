#pragma once
// Table and matrix representations: raw two-column tables as loaded from
// disk, code-mapped tables, and the CSR boolean matrix both kernels consume.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dim3/common.hpp"

namespace dim3 {

// ---------------------------------------------------------------------------
// Columns are homogeneous: every value is either a 64-bit integer or an
// opaque byte string. Loaders pick u64 when every cell parses as one.

enum class ColumnType : std::uint8_t { u64, bytes };

class ColumnData {
 public:
  ColumnType type = ColumnType::u64;
  std::vector<std::uint64_t> ints;
  std::vector<std::string> strs;

  std::size_t size() const {
    return type == ColumnType::u64 ? ints.size() : strs.size();
  }
  void push_int(std::uint64_t v) { ints.push_back(v); }
  void push_str(std::string v) { strs.push_back(std::move(v)); }

  bool value_equals(std::size_t i, const ColumnData& other, std::size_t j) const {
    if (type != other.type) return false;
    return type == ColumnType::u64 ? ints[i] == other.ints[j]
                                   : strs[i] == other.strs[j];
  }
};

// A binary relation; row i is (left[i], right[i]).
struct RawTable {
  ColumnData left, right;
  std::size_t size() const { return left.size(); }
};

// Relation with a numeric payload column, for aggregate queries.
struct ValuedTable {
  RawTable base;
  std::vector<double> values;
  std::size_t size() const { return base.size(); }
};

// ---------------------------------------------------------------------------
// Loading and saving. Formats: tsv, csv, binary (little-endian u64 pairs).

enum class FileFormat : std::uint8_t { auto_detect, tsv, csv, binary };

struct LoadOptions {
  FileFormat format = FileFormat::auto_detect;
  bool skip_header = false;
};

RawTable load_table(const std::filesystem::path& path, const LoadOptions& opt = {});
// Three-column variant; the third column must parse as a number.
ValuedTable load_valued_table(const std::filesystem::path& path,
                              const LoadOptions& opt = {});
void save_table(const RawTable& t, const std::filesystem::path& path,
                FileFormat format);

// ---------------------------------------------------------------------------
// Mapped table: rows are (a, b) code pairs. For R, a = x and b = y; for S,
// a = z and b = y. Stored as parallel arrays.

struct MappedTable {
  std::vector<Code> a, b;
  Code a_card = 0;  // code space of column a
  Code b_card = 0;
  std::size_t size() const { return a.size(); }
};

// ---------------------------------------------------------------------------
// CSR boolean matrix. Rows are sorted and duplicate-free; row_ptr has
// n_rows + 1 entries with row_ptr[0] == 0 and row_ptr[n_rows] == nnz.

struct CsrMatrix {
  std::vector<std::uint64_t> row_ptr;
  std::vector<Code> col;
  Code n_rows = 0;
  Code n_cols = 0;

  std::uint64_t nnz() const { return col.size(); }
  std::span<const Code> row(Code i) const {
    return {col.data() + row_ptr[i], col.data() + row_ptr[i + 1]};
  }
  std::uint32_t degree(Code i) const {
    return static_cast<std::uint32_t>(row_ptr[i + 1] - row_ptr[i]);
  }
  std::uint64_t bytes() const {
    return row_ptr.size() * sizeof(std::uint64_t) + col.size() * sizeof(Code);
  }
};

// Builds a CSR from a mapped table, major_is_a selecting which column keys
// the rows. Construction is two counting-sort passes (minor then major), so
// rows come out sorted; duplicate pairs are collapsed in the final write.
CsrMatrix build_csr(const MappedTable& t, bool major_is_a,
                    MemoryBudget* budget = nullptr);

// CSR keyed by column b restricted to rows whose a-code passes keep(a).
// Used by the partition step to form the sparse remainder of S.
// (Declared here because it is a matrix construction, not a policy.)

// ---------------------------------------------------------------------------
// Result of a join-project run. Pairs are either raw values (classical path,
// no mapping) or codes plus the dictionaries held by the caller.

struct ResultSet {
  enum class Provenance : std::uint8_t { raw, mapped };
  Provenance provenance = Provenance::raw;
  bool materialized = true;  // false when count-only
  std::uint64_t count = 0;
  std::vector<std::pair<Code, Code>> code_pairs;  // provenance == mapped
  ColumnData raw_x, raw_z;                        // provenance == raw
};

}  // namespace dim3
