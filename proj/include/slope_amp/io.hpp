#pragma once

// Plain-text array files: headerless, comma-separated, row-major. A matrix
// stored as `X.csv` has its shape in the sidecar `X.json`
// ({"rows": n, "cols": p}). Vectors are written one value per line.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "slope_amp/errors.hpp"
#include "slope_amp/sorted_l1.hpp"

namespace slope_amp::io {

namespace fs = std::filesystem;

/// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline fs::path sidecar_path(const fs::path& data) {
  fs::path side = data;
  side.replace_extension(".json");
  return side;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

struct Table {
  std::vector<double> values;
  std::vector<std::size_t> row_lengths;
};

inline Table parse_table(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty() || rest.front() == '#') continue;
    std::size_t count = 0;
    while (true) {
      const std::size_t comma = rest.find(',');
      const std::string_view field = trim(rest.substr(0, comma));
      double value = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
      if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw InvalidArgument(source + ":" + std::to_string(line_no) + ": cannot parse '" +
                              std::string(field) + "' as a number");
      }
      t.values.push_back(value);
      ++count;
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    t.row_lengths.push_back(count);
  }
  return t;
}

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace detail

inline Vector parse_vector(std::istream& in, const std::string& source = "<input>") {
  const detail::Table t = detail::parse_table(in, source);
  return Eigen::Map<const Vector>(t.values.data(), static_cast<Index>(t.values.size()));
}

inline Vector read_vector(const fs::path& path) {
  std::ifstream in = detail::open_input(path);
  return parse_vector(in, path.string());
}

inline Matrix read_matrix(const fs::path& path) {
  std::ifstream in = detail::open_input(path);
  const detail::Table t = detail::parse_table(in, path.string());
  Index rows = static_cast<Index>(t.row_lengths.size());
  Index cols = rows ? static_cast<Index>(t.row_lengths.front()) : 0;
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    std::ifstream sin = detail::open_input(side);
    nlohmann::json meta;
    try {
      sin >> meta;
      rows = meta.at("rows").get<Index>();
      cols = meta.at("cols").get<Index>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(side.string() + ": " + e.what());
    }
    if (rows < 0 || cols < 0) throw InvalidArgument(side.string() + ": negative shape");
  } else {
    for (std::size_t r = 0; r < t.row_lengths.size(); ++r) {
      if (static_cast<Index>(t.row_lengths[r]) != cols) {
        throw InvalidArgument(path.string() + ": row " + std::to_string(r + 1) + " has " +
                              std::to_string(t.row_lengths[r]) + " fields, expected " +
                              std::to_string(cols));
      }
    }
  }
  if (static_cast<Index>(t.values.size()) != rows * cols) {
    throw InvalidArgument(path.string() + ": expected " + std::to_string(rows * cols) +
                          " values, found " + std::to_string(t.values.size()));
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(t.values.data(), rows, cols);
}

inline void write_vector(const fs::path& path, const VectorCRef& v,
                         const std::string& header = {}) {
  std::ofstream out = detail::open_output(path);
  if (!header.empty()) out << header << '\n';
  for (Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
}

inline void write_matrix(const fs::path& path, const MatrixCRef& m) {
  {
    std::ofstream out = detail::open_output(path);
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) {
        if (c) out << ',';
        out << format_double(m(r, c));
      }
      out << '\n';
    }
  }
  std::ofstream side = detail::open_output(sidecar_path(path));
  side << nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}}.dump() << '\n';
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace slope_amp::io
