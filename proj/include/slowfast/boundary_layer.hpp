#pragma once

#include "slowfast/ode.hpp"
#include "slowfast/problem.hpp"
#include "slowfast/reduced.hpp"
#include "slowfast/riccati_full.hpp"

#include <iosfwd>
#include <utility>
#include <vector>

namespace slowfast {

/// Boundary-layer correction in stretched time tau = (T - t) / eps, with the
/// slow block frozen at P11_fixed. Shifted so the equilibrium is the origin.
struct BoundaryTrajectory {
  std::vector<double> tau_grid;
  std::vector<Matrix> P12hat;
  std::vector<Matrix> P22hat;
  Matrix P11_fixed;
  Matrix h1;  ///< equilibrium off-diagonal block at P11_fixed
  Matrix h2;  ///< h2(P11_fixed)
  double fitted_rate_12;  ///< NaN when the fit is undefined
  double fitted_rate_22;
  Matrix init_12;
  Matrix init_22;
  HermiteTrajectory dense;  ///< state (P12hat | P22hat), column-major

  double tau_max() const { return tau_grid.back(); }
  /// (P12hat, P22hat) at tau; zero beyond tau_max.
  std::pair<Matrix, Matrix> evaluate(double tau) const;
};

/// Integrates dP12hat/dtau = g1(P11, P12hat + h1, P22hat + h2, 0) and
/// dP22hat/dtau = g2(...) forward on [0, tau_max]. Throws Divergence when a
/// block norm exceeds 1e6 and DeltaNotPositive when R + D1'P11 D1 +
/// D2'(P22hat + h2) D2 degenerates.
BoundaryTrajectory solve_boundary_layer(const Matrix& P11_fixed, const Matrix& init_12,
                                        const Matrix& init_22, double tau_max,
                                        const ProblemData& data);

/// Default horizon 20 / |closed-loop abscissa of the fast ARE at P11|.
double default_tau_max(const Matrix& P11_fixed, const ProblemData& data);

/// The layer that cancels the reduced solution's terminal mismatch:
/// P11_fixed = P11bar(T), init = -(P12bar(T), P22bar(T)).
BoundaryTrajectory terminal_boundary_layer(const ReducedSolution& reduced,
                                           double tau_max = 0.0);

/// Least-squares slope of -log|block| over 201 samples of [tau_max/2, tau_max].
/// A block that vanishes on the whole window gets +infinity. Throws
/// ZeroDisplacement for a zero initial displacement and NonDecaying if a
/// fitted slope is not negative.
std::pair<double, double> estimate_decay_rate(const BoundaryTrajectory& traj);

/// Reduced solution plus boundary correction at a fixed eps.
class CompositeApproximation {
 public:
  CompositeApproximation(const ReducedSolution& reduced, BoundaryTrajectory layer,
                         double epsilon);

  /// (P11bar(t), P12bar(t) + P12hat((T-t)/eps), P22bar(t) + P22hat((T-t)/eps)).
  RiccatiBlocks evaluate(double t) const;
  /// Same, reusing an already evaluated reduced triple at t.
  RiccatiBlocks correct(const RiccatiBlocks& reduced_at_t, double t) const;

  double epsilon() const { return epsilon_; }
  const BoundaryTrajectory& layer() const { return layer_; }

 private:
  ReducedSolution reduced_;
  BoundaryTrajectory layer_;
  double epsilon_;
};

RiccatiBlocks composite_approximation(const ReducedSolution& reduced, double epsilon,
                                      double t);

/// `tau,P12hat_*,P22hat_*,norm12,norm22`.
void write_boundary_csv(std::ostream& out, const BoundaryTrajectory& traj);

}  // namespace slowfast
