#pragma once

#include "slowfast/ode.hpp"
#include "slowfast/problem.hpp"
#include "slowfast/riccati_full.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace slowfast {

/// Stabilizing solution of the fast algebraic Riccati equation with the slow
/// block frozen.
struct AreSolution {
  Matrix P22;  ///< positive definite
  Matrix F2;   ///< k x n2 gain
  double closed_loop_abscissa;  ///< spectral abscissa of A22 + B2 F2
  int newton_iters;
};

/// h2(P11): Newton-Kleinman on closed-loop stochastic Lyapunov equations,
/// started from `warm_start` if given and admissible, else from F = 0.
AreSolution solve_h2(const Matrix& P11, const ProblemData& data,
                     const std::optional<Matrix>& warm_start = std::nullopt);

/// Residual of the fast ARE at (P11, P22).
Matrix are_residual(const Matrix& P11, const Matrix& P22, const ProblemData& data);

/// Gain -(R + D1'P11 D1 + D2'P22 D2)^{-1}(B2'P22 + D1'P11 C12 + D2'P22 C22).
Matrix fast_gain(const Matrix& P11, const Matrix& P22, const ProblemData& data);

/// h2'(P11): the solution X of A22'X + XA22 + C22'XC22 + Q22 + C12'P11 C12 = 0.
Matrix h2_linear_bound(const Matrix& P11, const ProblemData& data);

/// The eps = 0 off-diagonal block that zeroes g1 at (P11, P22). Throws
/// SingularClosedLoop when A22 + B2 F2 is (numerically) singular.
Matrix compute_p12(const Matrix& P11, const Matrix& P22, const ProblemData& data);

/// Gains of the reduced problem.
FeedbackGains reduced_gains(const Matrix& P11, const Matrix& P12,
                            const Matrix& P22, const ProblemData& data);

/// Right-hand side G of the reduced differential Riccati equation
/// dP11/dt + G(P11) = 0 written with the reduced coefficients, where P22 is
/// supplied by the caller (normally h2(P11)).
Matrix reduced_dre_rhs(const Matrix& P11, const Matrix& P22,
                       const ReducedCoefficients& rc);

/// R_s + D1s' P11 D1s + D2s' P22 D2s.
Matrix delta_s(const Matrix& P11, const Matrix& P22, const ReducedCoefficients& rc);

/// R + D1' P11 D1 + D2' P22 D2.
Matrix delta_bar(const Matrix& P11, const Matrix& P22, const ProblemData& data);

/// Solution of the reduced differential-algebraic Riccati equation on the
/// accepted-step grid, ascending in t.
class ReducedSolution {
 public:
  ReducedSolution(const ProblemData& data, HermiteTrajectory p11_dense);

  const std::vector<double>& grid() const { return p11_dense_.nodes(); }
  size_t size() const { return grid().size(); }

  const std::vector<Matrix>& P11bar() const { return p11_; }
  const std::vector<Matrix>& P12bar() const { return p12_; }
  const std::vector<Matrix>& P22bar() const { return p22_; }
  const std::vector<Matrix>& F1bar() const { return f1_; }
  const std::vector<Matrix>& F2bar() const { return f2_; }
  const std::vector<double>& delta_bar_min() const { return delta_bar_min_; }
  const std::vector<double>& delta_s_min() const { return delta_s_min_; }
  const std::vector<double>& closed_loop_abscissa() const { return abscissa_; }

  /// P11 by Hermite interpolation; P22 = h2(P11) and P12 recomputed
  /// algebraically from the interpolated P11.
  RiccatiBlocks evaluate(double t) const;
  Matrix evaluate_p11(double t) const;
  FeedbackGains gains_at(double t) const;

  const ProblemData& data() const { return data_; }

 private:
  ProblemData data_;
  HermiteTrajectory p11_dense_;
  std::vector<Matrix> p11_, p12_, p22_, f1_, f2_;
  std::vector<double> delta_bar_min_, delta_s_min_, abscissa_;
};

/// Backward integration of the reduced DRE with h2 evaluated inside every
/// right-hand side call (warm-started within this solve). Max step T/100.
ReducedSolution solve_reduced_dre(const ProblemData& data,
                                  const StepControl& control = {});

/// Iterates of the constructive Lyapunov scheme for the reduced DRE on a
/// fixed grid (ascending, covering [0, T]).
struct LyapunovIteration {
  std::vector<double> grid;
  std::vector<std::vector<Matrix>> iterates;  ///< iterates[i][m] = P^i(grid[m])
  std::vector<double> gaps;  ///< sup-norm gap between iterate i and i+1
  bool converged;
};

/// Runs the scheme from the perturbed Lyapunov initialisation. Stops when
/// the sup-norm gap between consecutive iterates is <= 1e-10; throws
/// MaxItersExceeded (value = last gap) otherwise.
LyapunovIteration lyapunov_iteration_check(const ProblemData& data,
                                           const std::vector<double>& grid,
                                           int max_iters);

struct ReducedResiduals {
  double g1;
  double g2;
};

/// max over the grid of |g1|, |g2| evaluated at eps = 0.
ReducedResiduals residuals_reduced(const ReducedSolution& sol,
                                   const ProblemData& data);
ReducedResiduals residuals_reduced(const std::vector<RiccatiBlocks>& points,
                                   const ProblemData& data);

/// `t,P11_*,P12_*,P22_*,delta_min,delta_s_min,F1bar_*,F2bar_*`.
void write_reduced_csv(std::ostream& out, const ReducedSolution& sol);

}  // namespace slowfast
