#pragma once

#include "slowfast/linalg.hpp"

#include <functional>
#include <vector>

namespace slowfast {

/// Tolerances for the adaptive integrators. `max_step` <= 0 selects the
/// caller's default cap.
struct StepControl {
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = 0.0;
};

/// Piecewise cubic Hermite interpolant through stored (x, y, dy/dx) samples.
/// Nodes are strictly increasing.
class HermiteTrajectory {
 public:
  HermiteTrajectory() = default;
  HermiteTrajectory(std::vector<double> nodes, std::vector<Vector> values,
                    std::vector<Vector> derivatives);

  /// Clamps x to [front, back]. Returns stored values exactly at nodes.
  Vector evaluate(double x) const;

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<Vector>& values() const { return values_; }
  const std::vector<Vector>& derivatives() const { return derivatives_; }
  bool empty() const { return nodes_.empty(); }

  /// Reverses the independent variable: x -> offset - x. Derivatives flip
  /// sign. Used to turn backward-time solutions into forward-time ones.
  HermiteTrajectory reflected(double offset) const;

 private:
  std::vector<double> nodes_;
  std::vector<Vector> values_;
  std::vector<Vector> derivatives_;
};

using OdeRhs = std::function<void(double x, const Vector& y, Vector& dy)>;

/// Called after every accepted step with the new state. May modify the
/// state in place (projection) or throw to abort the integration.
using StepHook = std::function<void(double x, Vector& y)>;

/// Dormand-Prince 5(4) with mixed absolute/relative error control on
/// [x0, x1], x1 > x0. Throws StepSizeUnderflow if the step drops below
/// 1e-14 (x1 - x0); if the last rejected trial came from an exception in
/// the right-hand side, that exception is rethrown instead.
HermiteTrajectory integrate_dopri5(const OdeRhs& rhs, double x0, double x1,
                                   Vector y0, const StepControl& control,
                                   double max_step, const StepHook& hook = {});

}  // namespace slowfast
