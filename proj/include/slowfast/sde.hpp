#pragma once

#include "slowfast/problem.hpp"
#include "slowfast/reduced.hpp"
#include "slowfast/riccati_full.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace slowfast {

/// Time-varying linear feedback u = F1(t) X1 + F2(t) X2, linear between nodes.
struct GainSchedule {
  std::vector<double> grid;
  std::vector<Matrix> F1;
  std::vector<Matrix> F2;
  std::string label;

  FeedbackGains at(double t) const;
};

GainSchedule zero_gains(const ProblemData& data);
/// Optimal gains of the full problem sampled on `grid`.
GainSchedule full_gains(const RiccatiTrajectory& traj, const ProblemData& data,
                        const std::vector<double>& grid);
/// Reduced gains (Fbar1, Fbar2) sampled on `grid`.
GainSchedule reduced_gain_schedule(const ReducedSolution& reduced,
                                   const std::vector<double>& grid);

/// Euler-Maruyama grid: ceil(T / step) equal steps (step <= eps / 10).
std::vector<double> simulation_grid(const ProblemData& data, double epsilon, double step);

struct StatePath {
  std::vector<double> times;
  std::vector<Vector> X1;
  std::vector<Vector> X2;
  std::vector<Vector> U;
  std::uint64_t seed;
  long path_index;
  bool exploded;  ///< |X| > 1e8 or non-finite; the path stops there
  double cost;    ///< trapezoid of (X'QX + u'Ru) / 2, NaN if exploded
};

StatePath simulate_path(const ProblemData& data, double epsilon, const GainSchedule& gains,
                        const Vector& x0, double step, std::uint64_t seed,
                        long path_index = 0);

struct CostEstimate {
  double mean;
  double std_error;  ///< sample std / sqrt(n_paths)
  long n_paths;      ///< paths used (exploded ones excluded)
  long n_exploded;
  double step;
  std::uint64_t seed;
};

/// Paths run in parallel; per-path costs are reduced in path order, so the
/// result does not depend on the thread count or schedule.
CostEstimate mc_cost(const ProblemData& data, double epsilon, const GainSchedule& gains,
                     const Vector& x0, long n_paths, double step, std::uint64_t seed);

/// Paired estimate of E[J(a) - J(b)] on common random numbers.
CostEstimate mc_cost_difference(const ProblemData& data, double epsilon,
                                const GainSchedule& a, const GainSchedule& b,
                                const Vector& x0, long n_paths, double step,
                                std::uint64_t seed);

/// Per-path costs (NaN for exploded paths), in path order.
std::vector<double> path_costs(const ProblemData& data, double epsilon,
                               const GainSchedule& gains, const Vector& x0, long n_paths,
                               double step, std::uint64_t seed);

/// Monte Carlo estimate of E|X(t)|^2 on the simulation grid.
std::vector<double> mc_second_moment(const ProblemData& data, double epsilon,
                                     const GainSchedule& gains, const Vector& x0,
                                     long n_paths, double step, std::uint64_t seed);

namespace reference {
/// Single-threaded loop over paths; must agree bit for bit with mc_cost.
CostEstimate mc_cost_serial(const ProblemData& data, double epsilon,
                            const GainSchedule& gains, const Vector& x0, long n_paths,
                            double step, std::uint64_t seed);
}  // namespace reference

struct CostGapReport {
  double epsilon;
  double V_eps;  ///< x' P^eps(0) x / 2
  double V_bar;  ///< x1' Pbar11(0) x1 / 2
  CostEstimate J_reduced;
  CostEstimate J_optimal;
  CostEstimate J_difference;  ///< paired J_reduced - J_optimal
  double gap_mc;              ///< J_reduced.mean - V_eps
  double gap_mc_se;           ///< J_reduced.std_error
  double gap_value;           ///< V_eps - V_bar
};

CostGapReport cost_gap_experiment(const ProblemData& data, double epsilon, const Vector& x0,
                                  long n_paths, double step, std::uint64_t seed);

/// `t,X1_*,X2_*,U_*`.
void write_path_csv(std::ostream& out, const StatePath& path);
void write_cost_gap_json(std::ostream& out, const CostGapReport& report);

}  // namespace slowfast
