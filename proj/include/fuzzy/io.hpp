#pragma once

// Columnar text output: comma-separated, '.' decimal point, one header row,
// LF line endings, %.17g fields (shortest exact round trip), so identical
// inputs produce byte-identical files.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzy/grid.hpp"

namespace fuzzy {

inline std::string format_field(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

// Writes named columns of equal length as CSV.  Throws on I/O failure.
inline void write_csv(const std::string& path, const std::vector<std::string>& names,
                      const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw std::invalid_argument("write_csv: header/column mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << "\n";
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& col : columns)
    if (col.size() != rows) throw std::invalid_argument("write_csv: ragged columns");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      out << (c ? "," : "") << format_field(columns[c][r]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

// Debug serialization of a state: columns x, re_g, im_g.
template <typename Scalar>
void write_state_csv(const std::string& path, const FuzzyState<Scalar>& state) {
  std::vector<double> x, re, im;
  x.reserve(state.grid.size());
  for (Eigen::Index j = 0; j < state.grid.size(); ++j) {
    x.push_back(static_cast<double>(state.grid.position(j)));
    re.push_back(static_cast<double>(state.samples(j).real()));
    im.push_back(static_cast<double>(state.samples(j).imag()));
  }
  write_csv(path, {"x", "re_g", "im_g"}, {x, re, im});
}

}  // namespace fuzzy
