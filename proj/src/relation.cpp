#include "dim3/relation.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>

namespace dim3 {
namespace {

FileFormat detect_format(const std::filesystem::path& path, FileFormat requested) {
  if (requested != FileFormat::auto_detect) return requested;
  auto ext = path.extension().string();
  if (ext == ".tsv" || ext == ".txt") return FileFormat::tsv;
  if (ext == ".csv") return FileFormat::csv;
  if (ext == ".bin") return FileFormat::binary;
  return FileFormat::tsv;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Splits a line into at most `want` fields. Returns the field count.
std::size_t split_fields(std::string_view line, char sep,
                         std::array<std::string_view, 4>& out) {
  std::size_t n = 0;
  std::size_t start = 0;
  while (n < out.size()) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out[n++] = line.substr(start);
      break;
    }
    out[n++] = line.substr(start, pos - start);
    start = pos + 1;
  }
  return n;
}

// Column cells buffered as strings until the whole file is read, then the
// column becomes u64 iff every cell parses as one.
void finalize_column(std::vector<std::string>&& cells, ColumnData& col) {
  bool all_int = true;
  for (const auto& c : cells) {
    if (!parse_u64(c)) {
      all_int = false;
      break;
    }
  }
  if (all_int) {
    col.type = ColumnType::u64;
    col.ints.reserve(cells.size());
    for (const auto& c : cells) col.ints.push_back(*parse_u64(c));
  } else {
    col.type = ColumnType::bytes;
    col.strs = std::move(cells);
  }
}

struct TextRows {
  std::vector<std::string> c0, c1, c2;
  bool has_third = false;
};

TextRows read_text(const std::filesystem::path& path, char sep, bool skip_header,
                   std::size_t min_fields) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TextRows rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && skip_header) continue;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::array<std::string_view, 4> f;
    std::size_t n = split_fields(line, sep, f);
    if (n < min_fields)
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected at least " + std::to_string(min_fields) +
                        " fields, got " + std::to_string(n));
    rows.c0.emplace_back(f[0]);
    rows.c1.emplace_back(f[1]);
    if (min_fields >= 3) rows.c2.emplace_back(f[2]);
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  return rows;
}

RawTable read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  std::streamoff len = in.tellg();
  in.seekg(0);
  if (len < 0 || len % 16 != 0)
    throw FormatError(path.string() + ": binary table length " +
                      std::to_string(len) + " is not a multiple of 16");
  std::size_t n = static_cast<std::size_t>(len) / 16;
  RawTable t;
  t.left.type = ColumnType::u64;
  t.right.type = ColumnType::u64;
  t.left.ints.resize(n);
  t.right.ints.resize(n);
  std::vector<std::uint64_t> buf(1 << 14);
  std::size_t done = 0;
  while (done < n) {
    std::size_t take = std::min(buf.size() / 2, n - done);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(take * 16));
    if (!in) throw IoError("read error on " + path.string());
    for (std::size_t i = 0; i < take; ++i) {
      t.left.ints[done + i] = buf[2 * i];
      t.right.ints[done + i] = buf[2 * i + 1];
    }
    done += take;
  }
  return t;
}

}  // namespace

RawTable load_table(const std::filesystem::path& path, const LoadOptions& opt) {
  FileFormat fmt = detect_format(path, opt.format);
  if (fmt == FileFormat::binary) return read_binary(path);
  char sep = fmt == FileFormat::csv ? ',' : '\t';
  TextRows rows = read_text(path, sep, opt.skip_header, 2);
  RawTable t;
  finalize_column(std::move(rows.c0), t.left);
  finalize_column(std::move(rows.c1), t.right);
  return t;
}

ValuedTable load_valued_table(const std::filesystem::path& path,
                              const LoadOptions& opt) {
  FileFormat fmt = detect_format(path, opt.format);
  if (fmt == FileFormat::binary)
    throw FormatError("valued tables are text only (tsv or csv)");
  char sep = fmt == FileFormat::csv ? ',' : '\t';
  TextRows rows = read_text(path, sep, opt.skip_header, 3);
  ValuedTable t;
  t.values.reserve(rows.c2.size());
  for (std::size_t i = 0; i < rows.c2.size(); ++i) {
    try {
      t.values.push_back(std::stod(rows.c2[i]));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": row " + std::to_string(i + 1) +
                        ": value column does not parse as a number");
    }
  }
  finalize_column(std::move(rows.c0), t.base.left);
  finalize_column(std::move(rows.c1), t.base.right);
  return t;
}

void save_table(const RawTable& t, const std::filesystem::path& path,
                FileFormat format) {
  FileFormat fmt = detect_format(path, format);
  if (fmt == FileFormat::binary) {
    if (t.left.type != ColumnType::u64 || t.right.type != ColumnType::u64)
      throw FormatError("binary format requires integer columns");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    std::vector<std::uint64_t> buf;
    buf.reserve(2 << 14);
    for (std::size_t i = 0; i < t.size(); ++i) {
      buf.push_back(t.left.ints[i]);
      buf.push_back(t.right.ints[i]);
      if (buf.size() == buf.capacity()) {
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * 8));
        buf.clear();
      }
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 8));
    if (!out) throw IoError("write error on " + path.string());
    return;
  }
  char sep = fmt == FileFormat::csv ? ',' : '\t';
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.left.type == ColumnType::u64)
      out << t.left.ints[i];
    else
      out << t.left.strs[i];
    out << sep;
    if (t.right.type == ColumnType::u64)
      out << t.right.ints[i];
    else
      out << t.right.strs[i];
    out << '\n';
  }
  if (!out) throw IoError("write error on " + path.string());
}

CsrMatrix build_csr(const MappedTable& t, bool major_is_a, MemoryBudget* budget) {
  const std::vector<Code>& major = major_is_a ? t.a : t.b;
  const std::vector<Code>& minor = major_is_a ? t.b : t.a;
  Code n_rows = major_is_a ? t.a_card : t.b_card;
  Code n_cols = major_is_a ? t.b_card : t.a_card;
  std::size_t nnz_in = major.size();

  // Scratch for the two counting-sort passes; released on return. The caller
  // charges the finished matrix itself.
  BudgetCharge scratch(budget, 3 * nnz_in * sizeof(Code) +
                                   (static_cast<std::uint64_t>(n_rows) +
                                    n_cols + 2) *
                                       8);

  // Pass 1: stable counting sort by minor.
  std::vector<std::uint64_t> cnt(static_cast<std::size_t>(n_cols) + 1, 0);
  for (Code c : minor) cnt[c + 1]++;
  for (std::size_t i = 1; i < cnt.size(); ++i) cnt[i] += cnt[i - 1];
  std::vector<Code> maj1(nnz_in), min1(nnz_in);
  for (std::size_t i = 0; i < nnz_in; ++i) {
    std::uint64_t pos = cnt[minor[i]]++;
    maj1[pos] = major[i];
    min1[pos] = minor[i];
  }

  // Pass 2: stable counting sort by major; rows come out minor-sorted.
  CsrMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.row_ptr.assign(static_cast<std::size_t>(n_rows) + 1, 0);
  for (Code c : maj1) m.row_ptr[c + 1]++;
  for (std::size_t i = 1; i < m.row_ptr.size(); ++i)
    m.row_ptr[i] += m.row_ptr[i - 1];
  std::vector<Code> min2(nnz_in);
  {
    std::vector<std::uint64_t> cursor(m.row_ptr.begin(), m.row_ptr.end() - 1);
    for (std::size_t i = 0; i < nnz_in; ++i) min2[cursor[maj1[i]]++] = min1[i];
  }

  // Collapse duplicates per row into the final col array.
  m.col.reserve(nnz_in);
  std::vector<std::uint64_t> new_ptr(static_cast<std::size_t>(n_rows) + 1, 0);
  for (Code r = 0; r < n_rows; ++r) {
    std::uint64_t lo = m.row_ptr[r], hi = m.row_ptr[r + 1];
    for (std::uint64_t i = lo; i < hi; ++i) {
      if (i > lo && min2[i] == min2[i - 1]) continue;
      m.col.push_back(min2[i]);
    }
    new_ptr[r + 1] = m.col.size();
  }
  m.row_ptr = std::move(new_ptr);
  return m;
}

}  // namespace dim3
