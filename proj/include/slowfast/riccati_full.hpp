#pragma once

#include "slowfast/ode.hpp"
#include "slowfast/problem.hpp"

#include <iosfwd>
#include <vector>

namespace slowfast {

/// The three blocks of the first-order partition
///   P = [[P11, eps P12], [eps P12', eps P22]].
struct RiccatiBlocks {
  Matrix P11;  ///< n1 x n1, symmetric
  Matrix P12;  ///< n1 x n2
  Matrix P22;  ///< n2 x n2, symmetric
};

struct FullRhs {
  Matrix f;   ///< n1 x n1
  Matrix g1;  ///< n1 x n2
  Matrix g2;  ///< n2 x n2
};

struct FeedbackGains {
  Matrix F1;  ///< k x n1
  Matrix F2;  ///< k x n2
};

/// R + (D^eps)' P D^eps written in block form. Valid for eps = 0.
Matrix delta_full(const RiccatiBlocks& p, double epsilon, const ProblemData& data);

/// f, g1, g2 of the partitioned Riccati system; eps = 0 gives the reduced
/// system's right-hand sides. Throws DeltaNotPositive when
/// min eig(Delta) <= 1e-12.
FullRhs eval_full_rhs(const RiccatiBlocks& p, double epsilon,
                      const ProblemData& data);

/// f, g1, g2 at (base + dp) minus their values at base, arranged so that
/// no O(1) quantities cancel: accurate even when |dp| is far below the
/// rounding level of the blocks themselves.
FullRhs eval_full_rhs_increment(const RiccatiBlocks& base, const RiccatiBlocks& dp,
                                double epsilon, const ProblemData& data);

/// [[P11, eps P12], [eps P12', eps P22]].
Matrix assemble_P(const RiccatiBlocks& p, double epsilon);

/// Optimal feedback blocks -(Delta)^{-1} [...] of the partitioned problem.
FeedbackGains feedback_gains_full(const RiccatiBlocks& p, double epsilon,
                                  const ProblemData& data);

/// Backward solution of the full system on [0, T], stored on the accepted
/// step grid (ascending in t) with Hermite dense output.
class RiccatiTrajectory {
 public:
  RiccatiTrajectory(double epsilon, int n1, int n2, HermiteTrajectory dense,
                    std::vector<double> delta_min);

  double epsilon() const { return epsilon_; }
  const std::vector<double>& grid() const { return dense_.nodes(); }
  const std::vector<double>& delta_min() const { return delta_min_; }
  size_t size() const { return dense_.nodes().size(); }

  /// Blocks at the i-th stored grid point.
  RiccatiBlocks at(size_t i) const;
  /// Blocks at arbitrary t in [0, T] via cubic Hermite interpolation.
  RiccatiBlocks evaluate(double t) const;

  /// Smallest accepted step (diagnostics for the stiffness checks).
  double min_step() const;
  /// Accepted steps inside (T - window, T].
  std::vector<double> steps_near_terminal(double window) const;

 private:
  double epsilon_;
  int n1_;
  int n2_;
  HermiteTrajectory dense_;
  std::vector<double> delta_min_;
};

/// Integrates the full system backward from P(T) = 0 in reversed time
/// s = T - t with an adaptive Dormand-Prince pair. The step is capped at
/// min(T/100, eps/2) (or control.max_step if smaller). Delta positivity is
/// checked at every accepted step.
RiccatiTrajectory solve_full(const ProblemData& data, double epsilon,
                             const StepControl& control = {});

/// Packs the blocks into the integrator's state vector (column-major).
Vector pack_blocks(const RiccatiBlocks& p);
RiccatiBlocks unpack_blocks(const Vector& y, int n1, int n2);

/// Writes `t,P11_ij...,P12_ij...,P22_ij...,delta_min`, 17 significant digits.
void write_full_csv(std::ostream& out, const RiccatiTrajectory& traj);

}  // namespace slowfast
