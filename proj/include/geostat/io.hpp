#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geostat/covmodel.hpp"
#include "geostat/errors.hpp"
#include "geostat/gmrf.hpp"

namespace geostat {

class parse_error : public std::runtime_error {
public:
  explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Parsed CSV point table: id, x, y, then one or more numeric value columns.
struct PointTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd xy;  // n x 2
  std::vector<std::string> value_names;
  Eigen::MatrixXd values;  // n x k

  Eigen::Index size() const { return xy.rows(); }
  LocationSet locations() const { return LocationSet(xy); }

  Eigen::Index value_column(const std::string& name) const {
    for (std::size_t i = 0; i < value_names.size(); ++i)
      if (value_names[i] == name) return static_cast<Eigen::Index>(i);
    throw parse_error("point table has no column '" + name + "'");
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_cell(const std::string& s, int row, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw parse_error("non-numeric value '" + s + "' at row " + std::to_string(row) +
                      ", column " + col);
  }
}

}  // namespace detail

// Load a point table. Header must contain id, x, y; every remaining column
// is read as a numeric value column.
inline PointTable load_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open point file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty file");
  const auto header = detail::split_csv_line(line);
  int id_col = -1, x_col = -1, y_col = -1;
  std::vector<int> value_cols;
  PointTable table;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "id") id_col = static_cast<int>(c);
    else if (header[c] == "x") x_col = static_cast<int>(c);
    else if (header[c] == "y") y_col = static_cast<int>(c);
    else {
      value_cols.push_back(static_cast<int>(c));
      table.value_names.push_back(header[c]);
    }
  }
  if (id_col < 0 || x_col < 0 || y_col < 0)
    throw parse_error(path + ": header must contain id, x and y columns");
  if (value_cols.empty()) throw parse_error(path + ": no value columns in header");

  std::vector<std::array<double, 2>> coords;
  std::vector<std::vector<double>> vals;
  std::set<std::string> seen;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw parse_error(path + ": row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    const std::string& id = cells[static_cast<std::size_t>(id_col)];
    if (!seen.insert(id).second)
      throw parse_error(path + ": duplicate id '" + id + "' at row " + std::to_string(row));
    table.ids.push_back(id);
    const double x = detail::parse_cell(cells[static_cast<std::size_t>(x_col)], row, "x");
    const double y = detail::parse_cell(cells[static_cast<std::size_t>(y_col)], row, "y");
    if (!std::isfinite(x) || !std::isfinite(y))
      throw parse_error(path + ": non-finite coordinate at row " + std::to_string(row));
    coords.push_back({x, y});
    std::vector<double> v;
    for (std::size_t k = 0; k < value_cols.size(); ++k)
      v.push_back(detail::parse_cell(cells[static_cast<std::size_t>(value_cols[k])], row,
                                     table.value_names[k]));
    vals.push_back(std::move(v));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(coords.size());
  table.xy.resize(n, 2);
  table.values.resize(n, static_cast<Eigen::Index>(value_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    table.xy(i, 0) = coords[static_cast<std::size_t>(i)][0];
    table.xy(i, 1) = coords[static_cast<std::size_t>(i)][1];
    for (Eigen::Index k = 0; k < table.values.cols(); ++k)
      table.values(i, k) = vals[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return table;
}

// Esri ASCII grid writer. Field is interior row-major with row 0 the
// northernmost row; values print with 6 significant digits, NaN as NODATA.
inline void write_ascii_grid(const Eigen::VectorXd& field, const GridSpec& grid,
                             const std::string& path, double xll = 0.0, double yll = 0.0) {
  if (field.size() != grid.n_interior())
    throw domain_error("write_ascii_grid: field length does not match the grid");
  std::ofstream out(path);
  if (!out) throw parse_error("cannot open output file: " + path);
  out << "ncols " << grid.n_cols << "\n";
  out << "nrows " << grid.n_rows << "\n";
  out << "xllcorner " << xll << "\n";
  out << "yllcorner " << yll << "\n";
  out << "cellsize " << grid.h << "\n";
  out << "NODATA_value -9999\n";
  char buf[64];
  for (int r = 0; r < grid.n_rows; ++r) {
    for (int c = 0; c < grid.n_cols; ++c) {
      const double v = field(static_cast<Eigen::Index>(r) * grid.n_cols + c);
      if (std::isnan(v))
        std::snprintf(buf, sizeof buf, "-9999");
      else
        std::snprintf(buf, sizeof buf, "%.6g", v);
      out << (c ? " " : "") << buf;
    }
    out << "\n";
  }
}

struct AsciiGrid {
  int ncols = 0, nrows = 0;
  double xll = 0, yll = 0, cellsize = 1, nodata = -9999;
  Eigen::VectorXd values;  // row-major, row 0 northernmost
};

inline AsciiGrid read_ascii_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open grid file: " + path);
  AsciiGrid g;
  std::string key;
  in >> key >> g.ncols >> key >> g.nrows >> key >> g.xll >> key >> g.yll >> key >> g.cellsize >>
      key >> g.nodata;
  g.values.resize(static_cast<Eigen::Index>(g.ncols) * g.nrows);
  for (Eigen::Index i = 0; i < g.values.size(); ++i)
    if (!(in >> g.values(i))) throw parse_error(path + ": truncated grid data");
  return g;
}

// key=value configuration with '#' comments; unknown keys are rejected.
using Config = std::map<std::string, std::string>;

inline Config parse_config(std::istream& in, const std::set<std::string>& allowed_keys) {
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw parse_error("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!allowed_keys.count(key))
      throw parse_error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (cfg.count(key))
      throw parse_error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg[key] = val;
  }
  return cfg;
}

inline Config load_config(const std::string& path, const std::set<std::string>& allowed_keys) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open config file: " + path);
  return parse_config(in, allowed_keys);
}

}  // namespace geostat
