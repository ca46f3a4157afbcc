#include "slowfast/tikhonov.hpp"

#include "slowfast/csv.hpp"
#include "slowfast/errors.hpp"
#include "slowfast/riccati_full.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <exception>
#include <ostream>
#include <string>

namespace slowfast {

namespace {

constexpr double kNoiseFloor = 1e-13;

void check_ladder(const std::vector<double>& epsilons) {
  if (epsilons.empty()) {
    throw Error(ErrorCode::EpsilonOutOfRange, "empty epsilon ladder");
  }
  for (size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] >= 1e-4 && epsilons[i] <= 1.0)) {
      throw Error(ErrorCode::EpsilonOutOfRange,
                  "epsilon " + csv::format(epsilons[i]) + " outside [1e-4, 1]",
                  std::nullopt, epsilons[i]);
    }
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
      throw Error(ErrorCode::EpsilonOutOfRange, "epsilons must be strictly decreasing");
    }
  }
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  double s = 0.0;
  for (size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

IntegralError integral_from(const std::vector<double>& grid,
                            const std::vector<RiccatiBlocks>& full,
                            const std::vector<RiccatiBlocks>& reduced, int j) {
  std::vector<double> y1(grid.size()), y2(grid.size());
  for (size_t m = 0; m < grid.size(); ++m) {
    y1[m] = std::pow((full[m].P12 - reduced[m].P12).norm(), j);
    y2[m] = std::pow((full[m].P22 - reduced[m].P22).norm(), j);
  }
  return {j, trapezoid(grid, y1), trapezoid(grid, y2)};
}

std::vector<RiccatiBlocks> sample_reduced(const ReducedSolution& r,
                                          const std::vector<double>& grid) {
  std::vector<RiccatiBlocks> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(r.evaluate(t));
  return out;
}

}  // namespace

std::vector<double> uniform_grid(double T, int points) {
  if (points < 2) throw Error(ErrorCode::DimensionMismatch, "grid needs >= 2 points");
  std::vector<double> g(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) g[i] = T * i / (points - 1);
  g.back() = T;
  return g;
}

ErrorTable sweep_epsilon(const ProblemData& data, const std::vector<double>& epsilons,
                         int grid_points, const std::vector<int>& integral_orders) {
  check_ladder(epsilons);
  for (int j : integral_orders) {
    if (j < 1) throw Error(ErrorCode::InvalidProblem, "integral order must be >= 1");
  }
  const ReducedSolution reduced = solve_reduced_dre(data);
  const BoundaryTrajectory layer = terminal_boundary_layer(reduced);
  const std::vector<double> grid = uniform_grid(data.T, grid_points);
  const std::vector<RiccatiBlocks> rgrid = sample_reduced(reduced, grid);

  const size_t ne = epsilons.size();
  ErrorTable table;
  table.epsilons = epsilons;
  table.grid_points = grid_points;
  table.sup_err_11.assign(ne, 0.0);
  table.sup_err_12.assign(ne, 0.0);
  table.sup_err_22.assign(ne, 0.0);
  table.raw_sup_err_12.assign(ne, 0.0);
  table.raw_sup_err_22.assign(ne, 0.0);
  table.terminal_err.assign(ne, {0.0, 0.0, 0.0});
  table.integral.assign(ne, {});
  std::vector<std::exception_ptr> failures(ne);

#pragma omp parallel for schedule(dynamic)
  for (long e = 0; e < static_cast<long>(ne); ++e) {
    try {
      const double eps = epsilons[e];
      const RiccatiTrajectory full = solve_full(data, eps);
      const CompositeApproximation comp(reduced, layer, eps);
      std::vector<RiccatiBlocks> fgrid;
      fgrid.reserve(grid.size());
      double e11 = 0, e12 = 0, e22 = 0, r12 = 0, r22 = 0;
      for (size_t m = 0; m < grid.size(); ++m) {
        fgrid.push_back(full.evaluate(grid[m]));
        const RiccatiBlocks& f = fgrid.back();
        const RiccatiBlocks c = comp.correct(rgrid[m], grid[m]);
        e11 = std::max(e11, (f.P11 - c.P11).norm());
        e12 = std::max(e12, (f.P12 - c.P12).norm());
        e22 = std::max(e22, (f.P22 - c.P22).norm());
        r12 = std::max(r12, (f.P12 - rgrid[m].P12).norm());
        r22 = std::max(r22, (f.P22 - rgrid[m].P22).norm());
        if (m + 1 == grid.size()) {
          table.terminal_err[e] = {(f.P11 - c.P11).norm(), (f.P12 - c.P12).norm(),
                                   (f.P22 - c.P22).norm()};
        }
      }
      table.sup_err_11[e] = e11;
      table.sup_err_12[e] = e12;
      table.sup_err_22[e] = e22;
      table.raw_sup_err_12[e] = r12;
      table.raw_sup_err_22[e] = r22;
      for (int j : integral_orders) {
        table.integral[e].push_back(integral_from(grid, fgrid, rgrid, j));
      }
    } catch (const Error& err) {
      failures[e] = std::make_exception_ptr(
          Error(err.code(), std::string(err.what()) + " [epsilon " +
                                csv::format(epsilons[e]) + "]",
                err.time(), epsilons[e]));
    } catch (...) {
      failures[e] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return table;
}

double fit_log_slope(const std::vector<double>& epsilons, const std::vector<double>& errors) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (size_t i = 0; i < epsilons.size(); ++i) {
    if (!(errors[i] > kNoiseFloor) || !std::isfinite(errors[i])) continue;
    const double x = std::log(epsilons[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 3) {
    throw Error(ErrorCode::NoiseFloor,
                "fewer than 3 errors above the 1e-13 noise floor", std::nullopt, m);
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

ConvergenceSlopes fit_convergence_order(const ErrorTable& t) {
  return {fit_log_slope(t.epsilons, t.sup_err_11), fit_log_slope(t.epsilons, t.sup_err_12),
          fit_log_slope(t.epsilons, t.sup_err_22)};
}

IntegralError integral_error_check(const ProblemData& data, double epsilon, int j,
                                   int grid_points) {
  check_ladder({epsilon});
  if (j < 1) throw Error(ErrorCode::InvalidProblem, "integral order must be >= 1");
  const ReducedSolution reduced = solve_reduced_dre(data);
  const RiccatiTrajectory full = solve_full(data, epsilon);
  const std::vector<double> grid = uniform_grid(data.T, grid_points);
  std::vector<RiccatiBlocks> fgrid;
  fgrid.reserve(grid.size());
  for (double t : grid) fgrid.push_back(full.evaluate(t));
  return integral_from(grid, fgrid, sample_reduced(reduced, grid), j);
}

void write_error_table_csv(std::ostream& out, const ErrorTable& t) {
  std::vector<std::string> header{"epsilon", "sup_err_11", "sup_err_12", "sup_err_22"};
  if (!t.integral.empty()) {
    for (const IntegralError& ie : t.integral.front()) {
      header.push_back("integral_j" + std::to_string(ie.j) + "_i1");
      header.push_back("integral_j" + std::to_string(ie.j) + "_i2");
    }
  }
  csv::write_row(out, header);
  for (size_t e = 0; e < t.epsilons.size(); ++e) {
    std::vector<std::string> row{csv::format(t.epsilons[e]), csv::format(t.sup_err_11[e]),
                                 csv::format(t.sup_err_12[e]), csv::format(t.sup_err_22[e])};
    for (const IntegralError& ie : t.integral[e]) {
      row.push_back(csv::format(ie.i1));
      row.push_back(csv::format(ie.i2));
    }
    csv::write_row(out, row);
  }
}

void write_slopes_json(std::ostream& out, const ErrorTable& t,
                       const std::optional<ConvergenceSlopes>& slopes) {
  nlohmann::ordered_json doc;
  doc["epsilons"] = t.epsilons;
  doc["grid_points"] = t.grid_points;
  if (slopes) {
    doc["slope_11"] = slopes->slope_11;
    doc["slope_12"] = slopes->slope_12;
    doc["slope_22"] = slopes->slope_22;
  } else {
    doc["slope_11"] = nullptr;
    doc["slope_12"] = nullptr;
    doc["slope_22"] = nullptr;
  }
  out << doc.dump(2) << '\n';
}

}  // namespace slowfast
