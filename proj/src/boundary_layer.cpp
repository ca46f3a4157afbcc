#include "slowfast/boundary_layer.hpp"

#include "slowfast/csv.hpp"
#include "slowfast/errors.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace slowfast {

namespace {

constexpr double kDivergence = 1e6;
constexpr int kFitSamples = 201;

Vector pack2(const Matrix& a, const Matrix& b) {
  Vector y(a.size() + b.size());
  y.head(a.size()) = Eigen::Map<const Vector>(a.data(), a.size());
  y.tail(b.size()) = Eigen::Map<const Vector>(b.data(), b.size());
  return y;
}

std::pair<Matrix, Matrix> unpack2(const Vector& y, int n1, int n2) {
  return {Eigen::Map<const Matrix>(y.data(), n1, n2),
          symmetrize(Eigen::Map<const Matrix>(y.data() + n1 * n2, n2, n2))};
}

/// Slope of log|x| against tau; +inf if every sample is zero.
double tail_rate(const std::vector<double>& tau, const std::vector<double>& norms) {
  double st = 0, sl = 0, stt = 0, stl = 0;
  int m = 0;
  for (size_t i = 0; i < tau.size(); ++i) {
    if (!(norms[i] > 0.0)) continue;
    const double l = std::log(norms[i]);
    st += tau[i];
    sl += l;
    stt += tau[i] * tau[i];
    stl += tau[i] * l;
    ++m;
  }
  if (m == 0) return std::numeric_limits<double>::infinity();
  if (m < 2) {
    throw Error(ErrorCode::NonDecaying, "too few nonzero tail samples for a fit");
  }
  const double slope = (m * stl - st * sl) / (m * stt - st * st);
  if (!(slope < 0.0)) {
    throw Error(ErrorCode::NonDecaying,
                "boundary layer tail does not decay (slope " + std::to_string(slope) + ")",
                std::nullopt, slope);
  }
  return -slope;
}

}  // namespace

std::pair<Matrix, Matrix> BoundaryTrajectory::evaluate(double tau) const {
  const int n1 = static_cast<int>(P11_fixed.rows());
  const int n2 = static_cast<int>(h2.rows());
  if (tau > tau_max()) return {Matrix::Zero(n1, n2), Matrix::Zero(n2, n2)};
  return unpack2(dense.evaluate(tau), n1, n2);
}

double default_tau_max(const Matrix& P11_fixed, const ProblemData& data) {
  return 20.0 / std::abs(solve_h2(P11_fixed, data).closed_loop_abscissa);
}

BoundaryTrajectory solve_boundary_layer(const Matrix& P11_fixed, const Matrix& init_12,
                                        const Matrix& init_22, double tau_max,
                                        const ProblemData& data) {
  data.check();
  const int n1 = data.n1, n2 = data.n2;
  if (P11_fixed.rows() != n1 || P11_fixed.cols() != n1 || init_12.rows() != n1 ||
      init_12.cols() != n2 || init_22.rows() != n2 || init_22.cols() != n2) {
    throw Error(ErrorCode::DimensionMismatch, "boundary-layer initial data shape");
  }
  if (!(tau_max > 0.0)) {
    throw Error(ErrorCode::InvalidProblem, "tau_max must be positive");
  }
  const AreSolution are = solve_h2(P11_fixed, data);
  const Matrix h2 = are.P22;
  const Matrix h1 = compute_p12(P11_fixed, h2, data);
  const RiccatiBlocks base{P11_fixed, h1, h2};

  auto rhs = [&](double, const Vector& y, Vector& dy) {
    const auto [p12, p22] = unpack2(y, n1, n2);
    // The equilibrium residual g(P11, h1, h2) is zero analytically; dropping it
    // lets the tail decay below the rounding level of h1, h2.
    const FullRhs r = eval_full_rhs_increment(
        base, {Matrix::Zero(n1, n1), p12, p22}, 0.0, data);
    dy = pack2(r.g1, r.g2);
  };
  auto hook = [&](double tau, Vector& y) {
    auto [p12, p22] = unpack2(y, n1, n2);
    y = pack2(p12, p22);
    if (!(p12.norm() <= kDivergence) || !(p22.norm() <= kDivergence)) {
      throw Error(ErrorCode::Divergence,
                  "boundary layer diverged at tau = " + std::to_string(tau), tau,
                  std::max(p12.norm(), p22.norm()));
    }
    const double lam = min_eigenvalue(delta_bar(P11_fixed, p22 + h2, data));
    if (!(lam > 1e-12)) {
      throw Error(ErrorCode::DeltaNotPositive,
                  "boundary-layer Delta lost positivity at tau = " + std::to_string(tau),
                  tau, lam);
    }
  };

  // The tail is fitted on values many orders below the initial ones, so the
  // absolute tolerance has to sit far under them.
  StepControl control{1e-10, 1e-24, 0.0};
  HermiteTrajectory dense =
      integrate_dopri5(rhs, 0.0, tau_max, pack2(init_12, symmetrize(init_22)), control,
                       tau_max / 200.0, hook);

  BoundaryTrajectory out;
  out.tau_grid = dense.nodes();
  for (const Vector& v : dense.values()) {
    auto [p12, p22] = unpack2(v, n1, n2);
    out.P12hat.push_back(p12);
    out.P22hat.push_back(p22);
  }
  out.P11_fixed = P11_fixed;
  out.h1 = h1;
  out.h2 = h2;
  out.init_12 = init_12;
  out.init_22 = symmetrize(init_22);
  out.dense = std::move(dense);
  out.fitted_rate_12 = std::numeric_limits<double>::quiet_NaN();
  out.fitted_rate_22 = std::numeric_limits<double>::quiet_NaN();
  try {
    const auto [r12, r22] = estimate_decay_rate(out);
    out.fitted_rate_12 = r12;
    out.fitted_rate_22 = r22;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroDisplacement && e.code() != ErrorCode::NonDecaying) {
      throw;
    }
  }
  return out;
}

BoundaryTrajectory terminal_boundary_layer(const ReducedSolution& reduced,
                                           double tau_max) {
  const Matrix p11 = reduced.P11bar().back();
  if (!(tau_max > 0.0)) tau_max = default_tau_max(p11, reduced.data());
  return solve_boundary_layer(p11, -reduced.P12bar().back(), -reduced.P22bar().back(),
                              tau_max, reduced.data());
}

std::pair<double, double> estimate_decay_rate(const BoundaryTrajectory& traj) {
  if (traj.init_12.norm() == 0.0 && traj.init_22.norm() == 0.0) {
    throw Error(ErrorCode::ZeroDisplacement,
                "zero initial displacement: decay rate undefined");
  }
  const double hi = traj.tau_max();
  const double lo = 0.5 * hi;
  std::vector<double> tau(kFitSamples), n12(kFitSamples), n22(kFitSamples);
  for (int i = 0; i < kFitSamples; ++i) {
    tau[i] = lo + (hi - lo) * i / (kFitSamples - 1);
    const auto [p12, p22] = traj.evaluate(tau[i]);
    n12[i] = p12.norm();
    n22[i] = p22.norm();
  }
  return {tail_rate(tau, n12), tail_rate(tau, n22)};
}

CompositeApproximation::CompositeApproximation(const ReducedSolution& reduced,
                                               BoundaryTrajectory layer, double epsilon)
    : reduced_(reduced), layer_(std::move(layer)), epsilon_(epsilon) {
  check_epsilon(epsilon);
}

RiccatiBlocks CompositeApproximation::correct(const RiccatiBlocks& r, double t) const {
  const double tau = (reduced_.data().T - t) / epsilon_;
  const auto [p12, p22] = layer_.evaluate(tau);
  return {r.P11, r.P12 + p12, r.P22 + p22};
}

RiccatiBlocks CompositeApproximation::evaluate(double t) const {
  return correct(reduced_.evaluate(t), t);
}

RiccatiBlocks composite_approximation(const ReducedSolution& reduced, double epsilon,
                                      double t) {
  return CompositeApproximation(reduced, terminal_boundary_layer(reduced), epsilon)
      .evaluate(t);
}

void write_boundary_csv(std::ostream& out, const BoundaryTrajectory& traj) {
  const auto n1 = traj.P11_fixed.rows();
  const auto n2 = traj.h2.rows();
  std::vector<std::string> header{"tau"};
  csv::add_matrix_columns(header, "P12hat", n1, n2);
  csv::add_matrix_columns(header, "P22hat", n2, n2);
  header.insert(header.end(), {"norm12", "norm22"});
  csv::write_row(out, header);
  for (size_t i = 0; i < traj.tau_grid.size(); ++i) {
    std::vector<std::string> row{csv::format(traj.tau_grid[i])};
    csv::add_matrix_values(row, traj.P12hat[i]);
    csv::add_matrix_values(row, traj.P22hat[i]);
    row.push_back(csv::format(traj.P12hat[i].norm()));
    row.push_back(csv::format(traj.P22hat[i].norm()));
    csv::write_row(out, row);
  }
}

}  // namespace slowfast
