#pragma once

#include "slowfast/boundary_layer.hpp"
#include "slowfast/problem.hpp"
#include "slowfast/reduced.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

namespace slowfast {

/// Integral gaps int_0^T |P^eps_i2 - Pbar_i2|^j dt for i = 1, 2.
struct IntegralError {
  int j;
  double i1;
  double i2;
};

/// Sup-norm (Frobenius, over a common uniform grid) block errors between the
/// full solution and the composite approximation, one row per eps.
struct ErrorTable {
  std::vector<double> epsilons;  ///< strictly decreasing
  std::vector<double> sup_err_11;
  std::vector<double> sup_err_12;
  std::vector<double> sup_err_22;
  /// Same errors without the boundary correction.
  std::vector<double> raw_sup_err_12;
  std::vector<double> raw_sup_err_22;
  /// Block errors at t = T (zero by construction).
  std::vector<std::array<double, 3>> terminal_err;
  /// integral[e] holds one entry per requested order j.
  std::vector<std::vector<IntegralError>> integral;
  int grid_points = 0;
};

struct ConvergenceSlopes {
  double slope_11;
  double slope_12;
  double slope_22;
};

std::vector<double> uniform_grid(double T, int points);

/// One full solve per eps (run concurrently); the reduced solution and the
/// boundary layer are shared. Solver errors are rethrown with value = eps.
ErrorTable sweep_epsilon(const ProblemData& data, const std::vector<double>& epsilons,
                         int grid_points = 2001,
                         const std::vector<int>& integral_orders = {});

/// Least-squares slope of log(err) against log(eps) per block. Errors
/// <= 1e-13 are dropped; NoiseFloor if fewer than 3 remain.
ConvergenceSlopes fit_convergence_order(const ErrorTable& table);
double fit_log_slope(const std::vector<double>& epsilons, const std::vector<double>& errors);

/// Trapezoid integral on a uniform grid, no boundary correction.
IntegralError integral_error_check(const ProblemData& data, double epsilon, int j,
                                   int grid_points = 2001);

/// `epsilon,sup_err_11,sup_err_12,sup_err_22[,integral_j<j>_i1,integral_j<j>_i2...]`.
void write_error_table_csv(std::ostream& out, const ErrorTable& table);
/// {"epsilons": [...], "slope_11": ..., ...}; slopes null when no fit.
void write_slopes_json(std::ostream& out, const ErrorTable& table,
                       const std::optional<ConvergenceSlopes>& slopes);

}  // namespace slowfast
