#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lqgcn/affiliation.hpp"
#include "lqgcn/cover.hpp"
#include "lqgcn/error.hpp"
#include "lqgcn/features.hpp"
#include "lqgcn/graph.hpp"
#include "lqgcn/model.hpp"

// Text formats.
//
//   edge list    optional "N=<n>" line, then one "u v" pair per line (tab or
//                spaces, 0-based ids). '#' starts a comment line.
//   attributes   sparse: header "N d NNZ" followed by NNZ lines "i j value";
//                dense:  one comma-separated row per node, no header.
//   cover        one community per line, space-separated node ids; a blank
//                line is an empty community.
//   affiliations N rows of K tab-separated values.
//   checkpoint   "lqgcn-checkpoint v1", then each weight matrix as
//                "<name> <rows> <cols>" followed by one row per line.
//
// Floating-point values are written in shortest round-trip form, so
// parse(write(x)) reproduces x exactly.

namespace lqgcn {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline bool is_comment_or_blank(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t b = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

inline std::vector<std::string_view> split_char(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(b, i - b)));
      b = i + 1;
    }
  }
  return out;
}

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw DataError(source + ":" + std::to_string(line) + ": " + msg);
}

template <class T>
std::optional<T> parse_number(std::string_view tok) {
  T v{};
  const char* end = tok.data() + tok.size();
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

template <class T>
T expect_number(std::string_view tok, const std::string& source, std::size_t line, const char* what) {
  auto v = parse_number<T>(tok);
  if (!v) parse_fail(source, line, std::string("malformed ") + what + " '" + std::string(tok) + "'");
  return *v;
}

inline std::istream& open_check(std::ifstream& in, const std::filesystem::path& path) {
  in.open(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace detail

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw NumericError("format_double: non-finite value");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw NumericError("format_double: conversion failed");
  return {buf, ptr};
}

/// Fixed notation with `digits` decimals.
inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Writes `content` to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in;
  detail::open_check(in, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Edge lists
// ---------------------------------------------------------------------------

inline Graph read_edge_list(std::istream& in, const std::string& source = "<edges>",
                            EdgeListStats* stats = nullptr) {
  std::optional<std::size_t> declared;
  std::vector<Edge> edges;
  std::size_t max_id = 0;
  bool any = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_comment_or_blank(line)) continue;
    const auto t = detail::trim(line);
    if (t.starts_with("N=")) {
      if (declared || !edges.empty()) detail::parse_fail(source, lineno, "node-count header must come first");
      declared = detail::expect_number<std::size_t>(detail::trim(t.substr(2)), source, lineno, "node count");
      continue;
    }
    const auto tok = detail::split_ws(t);
    if (tok.size() != 2) detail::parse_fail(source, lineno, "expected two node ids, got '" + std::string(t) + "'");
    const auto u = detail::expect_number<std::uint64_t>(tok[0], source, lineno, "node id");
    const auto v = detail::expect_number<std::uint64_t>(tok[1], source, lineno, "node id");
    if (declared && (u >= *declared || v >= *declared))
      detail::parse_fail(source, lineno, "node id " + std::to_string(std::max(u, v)) + " >= declared N=" +
                                             std::to_string(*declared));
    if (std::max(u, v) >= std::numeric_limits<Index>::max())
      detail::parse_fail(source, lineno, "node id too large");
    max_id = std::max<std::size_t>(max_id, std::max(u, v));
    any = true;
    edges.emplace_back(static_cast<Index>(u), static_cast<Index>(v));
  }
  const std::size_t n = declared ? *declared : (any ? max_id + 1 : 0);
  return Graph::from_edges(n, edges, stats);
}

inline Graph parse_edge_list(const std::filesystem::path& path, EdgeListStats* stats = nullptr) {
  std::ifstream in;
  detail::open_check(in, path);
  return read_edge_list(in, path.string(), stats);
}

/// Header line always written so isolated trailing nodes survive a round trip.
inline std::string format_edge_list(const Graph& g) {
  std::string out = "N=" + std::to_string(g.n_nodes()) + "\n";
  for (auto [u, v] : g.edges()) {
    out += std::to_string(u);
    out += '\t';
    out += std::to_string(v);
    out += '\n';
  }
  return out;
}

inline void write_edge_list(const std::filesystem::path& path, const Graph& g) {
  write_file_atomic(path, format_edge_list(g));
}

// ---------------------------------------------------------------------------
// Attributes
// ---------------------------------------------------------------------------

inline FeatureMatrix read_attributes(std::istream& in, const std::string& source = "<attributes>") {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<std::size_t, std::string>> lines;
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::is_comment_or_blank(line)) lines.emplace_back(lineno, std::string(detail::trim(line)));
  }
  if (lines.empty()) throw DataError(source + ": empty attribute file");

  const auto& [first_no, first] = lines.front();
  const bool sparse = first.find(',') == std::string::npos && detail::split_ws(first).size() == 3 &&
                      std::ranges::all_of(detail::split_ws(first), [](std::string_view t) {
                        return detail::parse_number<std::size_t>(t).has_value();
                      });

  if (sparse) {
    const auto h = detail::split_ws(first);
    const auto n = *detail::parse_number<std::size_t>(h[0]);
    const auto d = *detail::parse_number<std::size_t>(h[1]);
    const auto nnz = *detail::parse_number<std::size_t>(h[2]);
    if (lines.size() - 1 != nnz)
      detail::parse_fail(source, first_no,
                         "header declares " + std::to_string(nnz) + " entries, found " +
                             std::to_string(lines.size() - 1));
    std::vector<Triplet> t;
    t.reserve(nnz);
    for (std::size_t k = 1; k < lines.size(); ++k) {
      const auto& [no, l] = lines[k];
      const auto tok = detail::split_ws(l);
      if (tok.size() != 3) detail::parse_fail(source, no, "expected 'i j value'");
      const auto i = detail::expect_number<std::size_t>(tok[0], source, no, "row index");
      const auto j = detail::expect_number<std::size_t>(tok[1], source, no, "column index");
      const auto v = detail::expect_number<double>(tok[2], source, no, "value");
      if (i >= n || j >= d)
        detail::parse_fail(source, no,
                           "entry (" + std::to_string(i) + ", " + std::to_string(j) + ") outside declared " +
                               std::to_string(n) + " x " + std::to_string(d));
      if (!std::isfinite(v)) detail::parse_fail(source, no, "non-finite value");
      t.push_back({static_cast<Index>(i), static_cast<Index>(j), v});
    }
    return FeatureMatrix(CsrMatrix::from_triplets(n, d, std::move(t)));
  }

  std::vector<Triplet> t;
  std::size_t d = 0;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto& [no, l] = lines[r];
    const auto cells = detail::split_char(l, ',');
    if (r == 0) d = cells.size();
    if (cells.size() != d)
      detail::parse_fail(source, no, "expected " + std::to_string(d) + " columns, got " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = detail::expect_number<double>(cells[c], source, no, "value");
      if (!std::isfinite(v)) detail::parse_fail(source, no, "non-finite value");
      if (v != 0.0) t.push_back({static_cast<Index>(r), static_cast<Index>(c), v});
    }
  }
  return FeatureMatrix(CsrMatrix::from_triplets(lines.size(), d, std::move(t)));
}

inline FeatureMatrix parse_attributes(const std::filesystem::path& path) {
  std::ifstream in;
  detail::open_check(in, path);
  return read_attributes(in, path.string());
}

enum class AttributeFormat { sparse, dense };

inline std::string format_attributes(const FeatureMatrix& x, AttributeFormat fmt = AttributeFormat::sparse) {
  const CsrMatrix& m = x.csr();
  std::string out;
  if (fmt == AttributeFormat::sparse) {
    out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + " " + std::to_string(m.nnz()) + "\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto cols = m.row_cols(i);
      const auto vals = m.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k)
        out += std::to_string(i) + " " + std::to_string(cols[k]) + " " + format_double(vals[k]) + "\n";
    }
    return out;
  }
  if (m.cols() == 0) throw ShapeError("format_attributes: dense format needs at least one column");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m.at(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_attributes(const std::filesystem::path& path, const FeatureMatrix& x,
                             AttributeFormat fmt = AttributeFormat::sparse) {
  write_file_atomic(path, format_attributes(x, fmt));
}

// ---------------------------------------------------------------------------
// Covers
// ---------------------------------------------------------------------------

/// `n_nodes` bounds the ids; without it the node count is 1 + max id.
inline Cover read_cover(std::istream& in, std::optional<std::size_t> n_nodes = std::nullopt,
                        const std::string& source = "<cover>") {
  std::vector<Community> comms;
  std::size_t max_id = 0;
  bool any = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (!t.empty() && t.front() == '#') continue;
    Community c;
    for (auto tok : detail::split_ws(t)) {
      const auto v = detail::expect_number<std::uint64_t>(tok, source, lineno, "node id");
      if (n_nodes && v >= *n_nodes)
        detail::parse_fail(source, lineno, "node id " + std::to_string(v) + " >= N=" + std::to_string(*n_nodes));
      if (v >= std::numeric_limits<Index>::max()) detail::parse_fail(source, lineno, "node id too large");
      max_id = std::max<std::size_t>(max_id, v);
      any = true;
      c.push_back(static_cast<Index>(v));
    }
    comms.push_back(std::move(c));
  }
  const std::size_t n = n_nodes ? *n_nodes : (any ? max_id + 1 : 0);
  return Cover(n, std::move(comms));
}

inline Cover parse_cover(const std::filesystem::path& path, std::optional<std::size_t> n_nodes = std::nullopt) {
  std::ifstream in;
  detail::open_check(in, path);
  return read_cover(in, n_nodes, path.string());
}

/// An empty community is written as a blank line, so K survives a round trip.
inline std::string format_cover(const Cover& cover) {
  std::string out;
  for (const auto& c : cover.communities()) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (k) out += ' ';
      out += std::to_string(c[k]);
    }
    out += '\n';
  }
  return out;
}

inline void write_cover(const std::filesystem::path& path, const Cover& cover) {
  write_file_atomic(path, format_cover(cover));
}

// ---------------------------------------------------------------------------
// Affiliation matrices
// ---------------------------------------------------------------------------

inline std::string format_matrix_tsv(const DenseMatrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += '\t';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline DenseMatrix read_matrix_tsv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_comment_or_blank(line)) continue;
    std::vector<double> row;
    for (auto tok : detail::split_ws(line)) row.push_back(detail::expect_number<double>(tok, source, lineno, "value"));
    if (!rows.empty() && row.size() != rows.front().size())
      detail::parse_fail(source, lineno,
                         "expected " + std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  DenseMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline std::string format_affiliations(const AffiliationMatrix& f) { return format_matrix_tsv(f.matrix()); }

inline AffiliationMatrix read_affiliations(std::istream& in, const std::string& source = "<affiliations>") {
  return AffiliationMatrix(read_matrix_tsv(in, source));
}

inline AffiliationMatrix parse_affiliations(const std::filesystem::path& path) {
  std::ifstream in;
  detail::open_check(in, path);
  return read_affiliations(in, path.string());
}

inline void write_affiliations(const std::filesystem::path& path, const AffiliationMatrix& f) {
  write_file_atomic(path, format_affiliations(f));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCheckpointMagic = "lqgcn-checkpoint v1";

inline std::string format_checkpoint(const ModelParams& p) {
  std::string out(kCheckpointMagic);
  out += '\n';
  auto block = [&](const char* name, const DenseMatrix& m) {
    out += std::string(name) + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    out += format_matrix_tsv(m);
  };
  block("W1", p.w1);
  block("W2", p.w2);
  return out;
}

inline ModelParams read_checkpoint(std::istream& in, const std::string& source = "<checkpoint>") {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::string_view {
    if (!std::getline(in, line)) detail::parse_fail(source, lineno + 1, "unexpected end of checkpoint");
    ++lineno;
    return detail::trim(line);
  };
  if (next() != kCheckpointMagic) detail::parse_fail(source, lineno, "not a checkpoint file");
  auto block = [&](std::string_view name) {
    const auto head = detail::split_ws(next());
    if (head.size() != 3 || head[0] != name) detail::parse_fail(source, lineno, "expected '" + std::string(name) + " <rows> <cols>'");
    const auto r = detail::expect_number<std::size_t>(head[1], source, lineno, "row count");
    const auto c = detail::expect_number<std::size_t>(head[2], source, lineno, "column count");
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      const auto tok = detail::split_ws(next());
      if (tok.size() != c) detail::parse_fail(source, lineno, "expected " + std::to_string(c) + " values");
      for (std::size_t j = 0; j < c; ++j) m(i, j) = detail::expect_number<double>(tok[j], source, lineno, "value");
    }
    return m;
  };
  ModelParams p;
  p.w1 = block("W1");
  p.w2 = block("W2");
  if (p.w2.rows() != p.w1.cols()) detail::parse_fail(source, lineno, "W2 rows do not match W1 columns");
  return p;
}

inline void write_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
  write_file_atomic(path, format_checkpoint(p));
}

inline ModelParams parse_checkpoint(const std::filesystem::path& path) {
  std::ifstream in;
  detail::open_check(in, path);
  return read_checkpoint(in, path.string());
}

// ---------------------------------------------------------------------------
// Reference dataset shapes
// ---------------------------------------------------------------------------

struct DatasetShape {
  std::string_view name;
  std::size_t n_nodes;
  std::size_t n_edges;  // undirected
  std::size_t k;
  std::size_t d;
};

inline constexpr DatasetShape kReferenceDatasets[] = {
    {"facebook-348", 227, 6384, 14, 21},     {"facebook-686", 170, 3312, 14, 9},
    {"facebook-1684", 792, 28048, 17, 15},   {"engineering", 14927, 98610, 16, 4839},
    {"computer-science", 21597, 193500, 18, 7793}, {"chemistry", 35409, 314716, 14, 4877},
};

inline std::optional<DatasetShape> find_reference_dataset(std::string_view name) {
  for (const auto& s : kReferenceDatasets)
    if (s.name == name) return s;
  return std::nullopt;
}

/// Lists every field where the loaded data disagrees with the reference
/// shape. Edge mismatches report both the undirected and the directed count.
inline std::vector<std::string> check_dataset_shape(const DatasetShape& ref, const Graph& g,
                                                    const FeatureMatrix* attrs, const Cover* truth) {
  std::vector<std::string> problems;
  if (g.n_nodes() != ref.n_nodes)
    problems.push_back("N: expected " + std::to_string(ref.n_nodes) + ", got " + std::to_string(g.n_nodes()));
  if (g.n_edges() != ref.n_edges)
    problems.push_back("|E|: expected " + std::to_string(ref.n_edges) + ", got " + std::to_string(g.n_edges()) +
                       " undirected (" + std::to_string(2 * g.n_edges()) + " directed)");
  if (attrs && attrs->cols() != ref.d)
    problems.push_back("d: expected " + std::to_string(ref.d) + ", got " + std::to_string(attrs->cols()));
  if (truth && truth->size() != ref.k)
    problems.push_back("K: expected " + std::to_string(ref.k) + ", got " + std::to_string(truth->size()));
  return problems;
}

}  // namespace lqgcn
