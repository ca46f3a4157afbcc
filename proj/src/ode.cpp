#include "slowfast/ode.hpp"

#include "slowfast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <utility>

namespace slowfast {

HermiteTrajectory::HermiteTrajectory(std::vector<double> nodes,
                                     std::vector<Vector> values,
                                     std::vector<Vector> derivatives)
    : nodes_(std::move(nodes)),
      values_(std::move(values)),
      derivatives_(std::move(derivatives)) {
  if (nodes_.size() != values_.size() || nodes_.size() != derivatives_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "trajectory arrays differ in length");
  }
}

Vector HermiteTrajectory::evaluate(double x) const {
  if (nodes_.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "evaluate on empty trajectory");
  }
  if (x <= nodes_.front()) return values_.front();
  if (x >= nodes_.back()) return values_.back();
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  const size_t i = static_cast<size_t>(it - nodes_.begin()) - 1;
  const double x0 = nodes_[i];
  const double h = nodes_[i + 1] - x0;
  if (x == x0) return values_[i];
  const double u = (x - x0) / h;
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1;
  const double h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2;
  const double h11 = u3 - u2;
  return h00 * values_[i] + (h10 * h) * derivatives_[i] +
         h01 * values_[i + 1] + (h11 * h) * derivatives_[i + 1];
}

HermiteTrajectory HermiteTrajectory::reflected(double offset) const {
  const size_t n = nodes_.size();
  std::vector<double> nodes(n);
  std::vector<Vector> values(n), derivs(n);
  for (size_t i = 0; i < n; ++i) {
    nodes[n - 1 - i] = offset - nodes_[i];
    values[n - 1 - i] = values_[i];
    derivs[n - 1 - i] = -derivatives_[i];
  }
  return HermiteTrajectory(std::move(nodes), std::move(values), std::move(derivs));
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b* (difference between 5th and embedded 4th order weights).
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(const Vector& err, const Vector& y, const Vector& y_new,
                  const StepControl& ctl) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale =
        ctl.atol + ctl.rtol * std::max(std::abs(y(i)), std::abs(y_new(i)));
    const double r = err(i) / scale;
    sum += r * r;
  }
  return err.size() == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(err.size()));
}

}  // namespace

HermiteTrajectory integrate_dopri5(const OdeRhs& rhs, double x0, double x1,
                                   Vector y0, const StepControl& control,
                                   double max_step, const StepHook& hook) {
  if (!(x1 > x0)) {
    throw Error(ErrorCode::DimensionMismatch, "integration interval must be increasing");
  }
  const double span = x1 - x0;
  const double h_min = 1e-14 * span;
  const double h_max = std::min(max_step > 0 ? max_step : span, span);

  std::vector<double> xs{x0};
  std::vector<Vector> ys;
  std::vector<Vector> dys;
  Vector y = std::move(y0);
  if (hook) hook(x0, y);
  Vector k1(y.size());
  rhs(x0, y, k1);
  ys.push_back(y);
  dys.push_back(k1);

  // Initial step from the derivative scale.
  double h;
  {
    double d0 = 0.0, d1 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = control.atol + control.rtol * std::abs(y(i));
      d0 += (y(i) / sc) * (y(i) / sc);
      d1 += (k1(i) / sc) * (k1(i) / sc);
    }
    d0 = std::sqrt(d0 / std::max<Eigen::Index>(1, y.size()));
    d1 = std::sqrt(d1 / std::max<Eigen::Index>(1, y.size()));
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h = std::clamp(h, 10 * h_min, h_max);
  }

  Vector k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()), k6(y.size()),
      k7(y.size()), tmp(y.size()), y_new(y.size());
  double x = x0;
  std::exception_ptr last_stage_error;

  while (x < x1) {
    bool last = false;
    if (x + h >= x1 || x1 - (x + h) < h_min) {
      h = x1 - x;
      last = true;
    }

    double err = 0.0;
    bool stage_failed = false;
    try {
      tmp = y + h * a21 * k1;
      rhs(x + c2 * h, tmp, k2);
      tmp = y + h * (a31 * k1 + a32 * k2);
      rhs(x + c3 * h, tmp, k3);
      tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      rhs(x + c4 * h, tmp, k4);
      tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      rhs(x + c5 * h, tmp, k5);
      tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      rhs(x + h, tmp, k6);
      y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      rhs(x + h, y_new, k7);
      const Vector e =
          h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err = error_norm(e, y, y_new, control);
      if (!std::isfinite(err) || !y_new.allFinite()) stage_failed = true;
    } catch (const Error&) {
      last_stage_error = std::current_exception();
      stage_failed = true;
    }

    if (stage_failed || err > 1.0) {
      const double factor =
          stage_failed ? 0.25 : std::max(0.2, 0.9 * std::pow(err, -0.2));
      h *= factor;
      if (h < h_min) {
        if (stage_failed && last_stage_error) std::rethrow_exception(last_stage_error);
        throw Error(ErrorCode::StepSizeUnderflow,
                    "step size fell below 1e-14 of the interval", x);
      }
      continue;
    }

    last_stage_error = nullptr;
    x = last ? x1 : x + h;
    y = y_new;
    if (hook) hook(x, y);
    rhs(x, y, k1);
    xs.push_back(x);
    ys.push_back(y);
    dys.push_back(k1);

    const double factor =
        err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h = std::min(h * factor, h_max);
  }
  return HermiteTrajectory(std::move(xs), std::move(ys), std::move(dys));
}

}  // namespace slowfast
