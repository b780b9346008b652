#pragma once

#include <string>
#include <vector>

namespace shapetest::cli {

struct XYData {
  std::vector<double> x;
  std::vector<double> y;
};

// Header optional. Columns named x and y are used when present, otherwise the first two.
// Malformed content raises DataError citing the 1-based line number.
XYData read_xy_csv(const std::string& path);
XYData parse_xy_csv(const std::string& text);

}  // namespace shapetest::cli
