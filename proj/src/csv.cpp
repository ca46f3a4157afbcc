#include "slowfast/csv.hpp"

#include <cstdio>
#include <ostream>

namespace slowfast::csv {

std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void add_matrix_columns(std::vector<std::string>& header, const std::string& name,
                        Eigen::Index rows, Eigen::Index cols) {
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      header.push_back(name + "_" + std::to_string(i) + std::to_string(j));
    }
  }
}

void add_matrix_values(std::vector<std::string>& row, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format(m(i, j)));
  }
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace slowfast::csv
