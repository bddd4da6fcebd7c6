#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "isac/dp.hpp"
#include "isac/errors.hpp"
#include "isac/linalg.hpp"

namespace isac {

// Shortest exact decimal form: %.17g round-trips every double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open file for writing: " + path);
  }
  out << content;
  out.flush();
  if (!out) {
    throw IoError("write failed for file: " + path);
  }
}

// Grid table layout: first row holds the q coordinates (top-left cell empty),
// first column the p coordinates, cells the table values.
template <typename Derived, typename Formatter>
inline std::string grid_csv(const Grid& grid,
                            const Eigen::MatrixBase<Derived>& table,
                            Formatter&& format_cell) {
  std::string out;
  for (Eigen::Index j = 0; j < grid.q.size(); ++j) {
    out += ',';
    out += format_double(grid.q(j));
  }
  out += '\n';
  for (Eigen::Index i = 0; i < grid.p.size(); ++i) {
    out += format_double(grid.p(i));
    for (Eigen::Index j = 0; j < grid.q.size(); ++j) {
      out += ',';
      out += format_cell(table(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string value_csv(const Grid& grid, const ValueTable& table) {
  return grid_csv(grid, table.v, [](double v) { return format_double(v); });
}

inline std::string decision_csv(const Grid& grid, const DecisionMap& map) {
  return grid_csv(grid, map.u, [](int u) { return std::to_string(u); });
}

inline std::string advantage_csv(const Grid& grid, const AdvantageSurface& surface) {
  return grid_csv(grid, surface.d, [](double d) { return format_double(d); });
}

// Long-format threshold table. `kind` is comm_in_p (least p that communicates
// for each q) or sense_in_q (least q that senses for each p); missing
// thresholds are written as inf.
inline std::string thresholds_csv(const Grid& grid, const Thresholds& th) {
  std::string out = "kind,coordinate,threshold\n";
  for (Eigen::Index j = 0; j < grid.q.size(); ++j) {
    out += "comm_in_p," + format_double(grid.q(j)) + ',' +
           format_double(th.comm_threshold_in_p(j)) + '\n';
  }
  for (Eigen::Index i = 0; i < grid.p.size(); ++i) {
    out += "sense_in_q," + format_double(grid.p(i)) + ',' +
           format_double(th.sense_threshold_in_q(i)) + '\n';
  }
  return out;
}

// Every stage's decision map in one file: header "stage,p,<q values>", one
// row per (stage, p node).
inline std::string policy_csv(const Grid& grid,
                              const std::vector<DecisionMap>& maps) {
  std::string out = "stage,p";
  for (Eigen::Index j = 0; j < grid.q.size(); ++j) {
    out += ',';
    out += format_double(grid.q(j));
  }
  out += '\n';
  for (const auto& map : maps) {
    for (Eigen::Index i = 0; i < grid.p.size(); ++i) {
      out += std::to_string(map.stage);
      out += ',';
      out += format_double(grid.p(i));
      for (Eigen::Index j = 0; j < grid.q.size(); ++j) {
        out += ',';
        out += std::to_string(map.u(i, j));
      }
      out += '\n';
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace detail

// Inverse of policy_csv against a known grid.
inline std::vector<DecisionMap> parse_policy_csv(const std::string& text,
                                                 const Grid& grid) {
  const auto np = grid.p.size();
  const auto nq = grid.q.size();
  std::vector<DecisionMap> maps;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  Eigen::Index row_in_map = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) continue;  // header
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != static_cast<std::size_t>(nq) + 2) {
      throw ParseError("policy table line " + std::to_string(line_no) +
                       ": expected " + std::to_string(nq + 2) + " cells");
    }
    const int stage = std::stoi(cells[0]);
    if (maps.empty() || maps.back().stage != stage) {
      if (!maps.empty() && row_in_map != np) {
        throw ParseError("policy table: stage " +
                         std::to_string(maps.back().stage) +
                         " has too few rows");
      }
      if (stage != static_cast<int>(maps.size())) {
        throw ParseError("policy table: stages must appear consecutively from 0");
      }
      maps.push_back({stage, Eigen::MatrixXi::Zero(np, nq)});
      row_in_map = 0;
    }
    if (row_in_map >= np) {
      throw ParseError("policy table: too many rows for stage " +
                       std::to_string(stage));
    }
    for (Eigen::Index j = 0; j < nq; ++j) {
      const std::string& cell = cells[static_cast<std::size_t>(j) + 2];
      if (cell != "0" && cell != "1") {
        throw ParseError("policy table line " + std::to_string(line_no) +
                         ": decisions must be 0 or 1");
      }
      maps.back().u(row_in_map, j) = cell == "1" ? 1 : 0;
    }
    ++row_in_map;
  }
  if (!maps.empty() && row_in_map != np) {
    throw ParseError("policy table: last stage is incomplete");
  }
  return maps;
}

}  // namespace isac
