#pragma once

// Dataset containers. Binary format "RMAT": magic bytes 'R','M','A','T',
// a u32 version (currently 1), u64 row and column counts, then row-major
// float64 payload, all little-endian. Round-trips are bit-exact. CSV files
// carry 17 significant digits (shortest lossless double) via to_chars /
// from_chars, which are locale-independent. Loaders reject empty matrices and
// cite byte offsets (binary) or row/column positions (CSV) in their errors.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rspg/errors.hpp"
#include "rspg/rng.hpp"

namespace rspg::io {

static_assert(std::endian::native == std::endian::little, "matrix container assumes a little-endian host");

inline constexpr char kMatrixMagic[4] = {'R', 'M', 'A', 'T'};
inline constexpr std::uint32_t kMatrixVersion = 1;

inline void save_matrix_binary(const std::filesystem::path& path, const Matrix& M) {
  if (M.rows() < 1 || M.cols() < 1) throw format_error("refusing to write an empty matrix: " + path.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error("cannot open for writing: " + path.string());
  out.write(kMatrixMagic, 4);
  std::uint32_t version = kMatrixVersion;
  std::uint64_t rows = static_cast<std::uint64_t>(M.rows());
  std::uint64_t cols = static_cast<std::uint64_t>(M.cols());
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      double v = M(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  if (!out) throw format_error("write failed: " + path.string());
}

inline Matrix load_matrix_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t header = 4 + 4 + 8 + 8;
  if (bytes.size() < header)
    throw format_error(path.string() + ": truncated header at offset " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kMatrixMagic, 4) != 0) throw format_error(path.string() + ": bad magic at offset 0");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kMatrixVersion)
    throw format_error(path.string() + ": unsupported version " + std::to_string(version) + " at offset 4");
  std::uint64_t rows, cols;
  std::memcpy(&rows, bytes.data() + 8, 8);
  std::memcpy(&cols, bytes.data() + 16, 8);
  if (rows == 0 || cols == 0) throw format_error(path.string() + ": empty matrix (dimensions at offset 8)");
  const std::size_t expected = header + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(double);
  if (bytes.size() != expected)
    throw format_error(path.string() + ": payload size mismatch at offset " + std::to_string(bytes.size()) + " (expected " +
                       std::to_string(expected) + " bytes)");
  Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t offset = header;
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j) {
      double v;
      std::memcpy(&v, bytes.data() + offset, sizeof v);
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      offset += sizeof v;
    }
  return M;
}

// Shortest decimal form that parses back to the same double. Keeps text
// files compact while staying bit-exact through a round trip.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token, std::size_t row, std::size_t col) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size())
    throw format_error("CSV parse error at row " + std::to_string(row) + ", column " + std::to_string(col) + ": '" +
                       std::string(token) + "'");
  return v;
}

inline void save_matrix_csv(const std::filesystem::path& path, const Matrix& M) {
  if (M.rows() < 1 || M.cols() < 1) throw format_error("refusing to write an empty matrix: " + path.string());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw format_error("cannot open for writing: " + path.string());
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(M(i, j));
    }
    out << '\n';
  }
  if (!out) throw format_error("write failed: " + path.string());
}

inline Matrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    std::vector<double> row;
    std::size_t start = 0;
    std::size_t col = 0;
    for (;;) {
      std::size_t comma = line.find(',', start);
      std::string_view token(line.data() + start, (comma == std::string::npos ? line.size() : comma) - start);
      ++col;
      row.push_back(parse_double(token, lineno, col));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw format_error(path.string() + ": ragged row " + std::to_string(lineno) + " (got " + std::to_string(row.size()) +
                         " columns, expected " + std::to_string(rows.front().size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw format_error(path.string() + ": empty matrix");
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return M;
}

}  // namespace rspg::io
