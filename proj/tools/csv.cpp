#include "csv.hpp"

#include <shapetest/errors.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace shapetest::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    cell.erase(cell.begin(), std::find_if_not(cell.begin(), cell.end(), ws));
    cell.erase(std::find_if_not(cell.rbegin(), cell.rend(), ws).base(), cell.end());
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

XYData parse_xy_csv(const std::string& text) {
  XYData data;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::size_t xcol = 0, ycol = 1;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto cells = split(line);
    if (first) {
      first = false;
      double tmp;
      if (!cells.empty() && !parse_number(cells[0], tmp)) {
        std::vector<std::string> names;
        for (const auto& c : cells) names.push_back(lower(c));
        const auto fx = std::find(names.begin(), names.end(), "x");
        const auto fy = std::find(names.begin(), names.end(), "y");
        if (fx != names.end() && fy != names.end()) {
          xcol = static_cast<std::size_t>(fx - names.begin());
          ycol = static_cast<std::size_t>(fy - names.begin());
        } else if (cells.size() < 2) {
          throw DataError("line " + std::to_string(line_no) + ": expected at least two columns");
        }
        continue;
      }
    }
    if (cells.size() <= std::max(xcol, ycol))
      throw DataError("line " + std::to_string(line_no) + ": expected at least " + std::to_string(std::max(xcol, ycol) + 1) +
                      " columns");
    double x, y;
    if (!parse_number(cells[xcol], x))
      throw DataError("line " + std::to_string(line_no) + ": non-numeric x value '" + cells[xcol] + "'");
    if (!parse_number(cells[ycol], y))
      throw DataError("line " + std::to_string(line_no) + ": non-numeric y value '" + cells[ycol] + "'");
    data.x.push_back(x);
    data.y.push_back(y);
  }
  if (data.x.empty()) throw DataError("no data rows");
  return data;
}

XYData read_xy_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_xy_csv(buf.str());
}

}  // namespace shapetest::cli
