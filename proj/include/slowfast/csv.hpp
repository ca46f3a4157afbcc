#pragma once

#include "slowfast/linalg.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace slowfast::csv {

/// Shortest round-trippable text is not required; every number is written
/// with 17 significant digits so output is byte-stable across runs.
std::string format(double v);

/// Appends `name_ij` column names in row-major order.
void add_matrix_columns(std::vector<std::string>& header, const std::string& name,
                        Eigen::Index rows, Eigen::Index cols);

/// Appends the entries of m in row-major order.
void add_matrix_values(std::vector<std::string>& row, const Matrix& m);

void write_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace slowfast::csv
