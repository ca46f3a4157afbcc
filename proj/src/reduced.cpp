#include "slowfast/reduced.hpp"

#include "slowfast/csv.hpp"
#include "slowfast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>

namespace slowfast {

namespace {

constexpr double kDeltaFloor = 1e-12;
constexpr int kMaxNewton = 100;

Eigen::LDLT<Matrix> factor_positive(const Matrix& m, const char* what) {
  const double lam = min_eigenvalue(m);
  if (!(lam > kDeltaFloor)) {
    throw Error(ErrorCode::DeltaNotPositive,
                std::string(what) + " not positive definite (min eig " +
                    std::to_string(lam) + ")");
  }
  return Eigen::LDLT<Matrix>(m);
}

struct FrozenSlow {
  Matrix q;  ///< Q22 + C12' P11 C12
  Matrix r;  ///< R + D1' P11 D1
  Matrix s;  ///< D1' P11 C12
};

FrozenSlow freeze(const Matrix& P11, const ProblemData& d) {
  return {symmetrize(d.Q22() + d.C12.transpose() * P11 * d.C12),
          symmetrize(d.R + d.D1.transpose() * P11 * d.D1),
          d.D1.transpose() * P11 * d.C12};
}

/// One Newton-Kleinman step: value of the closed loop under gain F.
Matrix closed_loop_value(const Matrix& F, const FrozenSlow& fz, const ProblemData& d) {
  const Matrix a = d.A22 + d.B2 * F;
  const Matrix c = d.C22 + d.D2 * F;
  const Matrix q = fz.q + F.transpose() * fz.r * F + fz.s.transpose() * F +
                   F.transpose() * fz.s;
  return solve_stochastic_lyapunov(a, c, symmetrize(q));
}

Matrix gain_from(const Matrix& P22, const FrozenSlow& fz, const ProblemData& d) {
  const Matrix delta = symmetrize(fz.r + d.D2.transpose() * P22 * d.D2);
  const auto ldlt = factor_positive(delta, "R + D1'P11 D1 + D2'P22 D2");
  return -ldlt.solve(d.B2.transpose() * P22 + d.D2.transpose() * P22 * d.C22 + fz.s);
}

AreSolution newton_kleinman(const Matrix& P11, const ProblemData& d, Matrix F) {
  const FrozenSlow fz = freeze(P11, d);
  Matrix P;
  Matrix prev;
  double prev_diff = std::numeric_limits<double>::infinity();
  int iters = 0;
  bool converged = false;
  for (; iters < kMaxNewton; ++iters) {
    try {
      P = closed_loop_value(F, fz, d);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularOperator) throw;
      throw Error(ErrorCode::NoStabilizingSolution,
                  "closed-loop Lyapunov operator singular during Newton iteration");
    }
    if (!P.allFinite()) {
      throw Error(ErrorCode::NoStabilizingSolution, "Newton iterate not finite");
    }
    F = gain_from(P, fz, d);
    if (iters > 0) {
      const double diff = max_abs(P - prev);
      const double scale = 1.0 + max_abs(P);
      if (diff <= 1e-13 * scale) {
        converged = true;
        ++iters;
        break;
      }
      // Round-off floor: further steps no longer contract.
      if (diff >= prev_diff && diff <= 1e-10 * scale) {
        converged = true;
        ++iters;
        break;
      }
      prev_diff = diff;
    }
    prev = P;
  }
  if (!converged) {
    throw Error(ErrorCode::NoStabilizingSolution, "Newton-Kleinman did not converge");
  }
  AreSolution sol{symmetrize(P), F, 0.0, iters};
  sol.closed_loop_abscissa = spectral_abscissa(d.A22 + d.B2 * sol.F2);
  if (!(sol.closed_loop_abscissa < 0.0) || !(min_eigenvalue(sol.P22) > 1e-10)) {
    throw Error(ErrorCode::NoStabilizingSolution,
                "fast ARE has no stabilizing positive definite solution");
  }
  return sol;
}

}  // namespace

AreSolution solve_h2(const Matrix& P11, const ProblemData& data,
                     const std::optional<Matrix>& warm_start) {
  if (warm_start && warm_start->rows() == data.k && warm_start->cols() == data.n2) {
    try {
      return newton_kleinman(P11, data, *warm_start);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoStabilizingSolution) throw;
      // fall through to the cold start
    }
  }
  return newton_kleinman(P11, data, Matrix::Zero(data.k, data.n2));
}

Matrix are_residual(const Matrix& P11, const Matrix& P22, const ProblemData& d) {
  const FrozenSlow fz = freeze(P11, d);
  const Matrix m = d.B2.transpose() * P22 + d.D2.transpose() * P22 * d.C22 + fz.s;
  const Matrix delta = symmetrize(fz.r + d.D2.transpose() * P22 * d.D2);
  const auto ldlt = factor_positive(delta, "fast Delta");
  return symmetrize(d.A22.transpose() * P22 + P22 * d.A22 +
                    d.C22.transpose() * P22 * d.C22 + fz.q -
                    m.transpose() * ldlt.solve(m));
}

Matrix fast_gain(const Matrix& P11, const Matrix& P22, const ProblemData& data) {
  return gain_from(P22, freeze(P11, data), data);
}

Matrix h2_linear_bound(const Matrix& P11, const ProblemData& d) {
  return solve_stochastic_lyapunov(d.A22, d.C22,
                                   symmetrize(d.Q22() + d.C12.transpose() * P11 * d.C12));
}

Matrix compute_p12(const Matrix& P11, const Matrix& P22, const ProblemData& d) {
  const Matrix F2 = fast_gain(P11, P22, d);
  const Matrix closed = d.A22 + d.B2 * F2;
  if (condition_number(closed) > kConditionLimit) {
    throw Error(ErrorCode::SingularClosedLoop, "A22 + B2 F2 is singular");
  }
  const Matrix m = P11 * d.A12 + d.A21.transpose() * P22 +
                   d.C11.transpose() * P11 * d.C12 + d.C21.transpose() * P22 * d.C22 +
                   d.Q12() +
                   (P11 * d.B1 + d.C11.transpose() * P11 * d.D1 +
                    d.C21.transpose() * P22 * d.D2) *
                       F2;
  // P12 = -m closed^{-1}  <=>  closed' P12' = -m'
  return -closed.transpose().fullPivLu().solve(m.transpose()).transpose();
}

Matrix delta_bar(const Matrix& P11, const Matrix& P22, const ProblemData& d) {
  return symmetrize(d.R + d.D1.transpose() * P11 * d.D1 + d.D2.transpose() * P22 * d.D2);
}

Matrix delta_s(const Matrix& P11, const Matrix& P22, const ReducedCoefficients& rc) {
  return symmetrize(rc.Rs + rc.D1s.transpose() * P11 * rc.D1s +
                    rc.D2s.transpose() * P22 * rc.D2s);
}

FeedbackGains reduced_gains(const Matrix& P11, const Matrix& P12, const Matrix& P22,
                            const ProblemData& d) {
  const auto ldlt = factor_positive(delta_bar(P11, P22, d), "Delta bar");
  const Matrix m1 = d.B1.transpose() * P11 + d.B2.transpose() * P12.transpose() +
                    d.D1.transpose() * P11 * d.C11 + d.D2.transpose() * P22 * d.C21;
  const Matrix m2 = d.B2.transpose() * P22 + d.D1.transpose() * P11 * d.C12 +
                    d.D2.transpose() * P22 * d.C22;
  return {-ldlt.solve(m1), -ldlt.solve(m2)};
}

Matrix reduced_dre_rhs(const Matrix& P11, const Matrix& P22,
                       const ReducedCoefficients& rc) {
  const Matrix ms = rc.Bs.transpose() * P11 + rc.D1s.transpose() * P11 * rc.C1s +
                    rc.D2s.transpose() * P22 * rc.C2s + rc.Ls;
  const auto ldlt = factor_positive(delta_s(P11, P22, rc), "Delta_s");
  return symmetrize(rc.As.transpose() * P11 + P11 * rc.As +
                    rc.C1s.transpose() * P11 * rc.C1s +
                    rc.C2s.transpose() * P22 * rc.C2s + rc.Qs -
                    ms.transpose() * ldlt.solve(ms));
}

// --- ReducedSolution --------------------------------------------------------

ReducedSolution::ReducedSolution(const ProblemData& data, HermiteTrajectory p11_dense)
    : data_(data), p11_dense_(std::move(p11_dense)) {
  const ReducedCoefficients rc = reduced_coefficients(data_);
  const int n1 = data_.n1;
  std::optional<Matrix> warm;
  // Walk backward from T so the warm start follows the integration order.
  const size_t n = p11_dense_.nodes().size();
  p11_.resize(n);
  p12_.resize(n);
  p22_.resize(n);
  f1_.resize(n);
  f2_.resize(n);
  delta_bar_min_.resize(n);
  delta_s_min_.resize(n);
  abscissa_.resize(n);
  for (size_t j = n; j-- > 0;) {
    const Matrix p11 = Eigen::Map<const Matrix>(p11_dense_.values()[j].data(), n1, n1);
    const AreSolution are = solve_h2(p11, data_, warm);
    warm = are.F2;
    p11_[j] = p11;
    p22_[j] = are.P22;
    p12_[j] = compute_p12(p11, are.P22, data_);
    const FeedbackGains g = reduced_gains(p11, p12_[j], are.P22, data_);
    f1_[j] = g.F1;
    f2_[j] = g.F2;
    delta_bar_min_[j] = min_eigenvalue(delta_bar(p11, are.P22, data_));
    delta_s_min_[j] = min_eigenvalue(delta_s(p11, are.P22, rc));
    abscissa_[j] = are.closed_loop_abscissa;
  }
}

Matrix ReducedSolution::evaluate_p11(double t) const {
  const Vector v = p11_dense_.evaluate(t);
  return symmetrize(Eigen::Map<const Matrix>(v.data(), data_.n1, data_.n1));
}

RiccatiBlocks ReducedSolution::evaluate(double t) const {
  const auto& g = grid();
  const auto it = std::lower_bound(g.begin(), g.end(), t);
  const size_t j = std::min(static_cast<size_t>(it - g.begin()), g.size() - 1);
  if (it != g.end() && *it == t) return {p11_[j], p12_[j], p22_[j]};
  const Matrix p11 = evaluate_p11(t);
  const AreSolution are = solve_h2(p11, data_, f2_[j]);
  return {p11, compute_p12(p11, are.P22, data_), are.P22};
}

FeedbackGains ReducedSolution::gains_at(double t) const {
  const RiccatiBlocks b = evaluate(t);
  return reduced_gains(b.P11, b.P12, b.P22, data_);
}

ReducedSolution solve_reduced_dre(const ProblemData& data, const StepControl& control) {
  data.check();
  const ReducedCoefficients rc = reduced_coefficients(data);
  const int n1 = data.n1;
  const double T = data.T;
  std::optional<Matrix> warm;

  auto rhs = [&](double, const Vector& y, Vector& dy) {
    const Matrix p11 = symmetrize(Eigen::Map<const Matrix>(y.data(), n1, n1));
    const AreSolution are = solve_h2(p11, data, warm);
    warm = are.F2;
    const Matrix g = reduced_dre_rhs(p11, are.P22, rc);
    dy = Eigen::Map<const Vector>(g.data(), g.size());
  };
  auto hook = [&](double s, Vector& y) {
    Matrix p11 = symmetrize(Eigen::Map<const Matrix>(y.data(), n1, n1));
    y = Eigen::Map<const Vector>(p11.data(), p11.size());
    const AreSolution are = solve_h2(p11, data, warm);
    const double lam_s = min_eigenvalue(delta_s(p11, are.P22, rc));
    const double lam_bar = min_eigenvalue(delta_bar(p11, are.P22, data));
    if (!(lam_s > kDeltaFloor) || !(lam_bar > kDeltaFloor)) {
      throw Error(ErrorCode::DeltaNotPositive,
                  "reduced Delta lost positivity at t = " + std::to_string(T - s),
                  T - s);
    }
  };

  double cap = T / 100.0;
  if (control.max_step > 0) cap = std::min(cap, control.max_step);
  HermiteTrajectory backward =
      integrate_dopri5(rhs, 0.0, T, Vector::Zero(n1 * n1), control, cap, hook);
  return ReducedSolution(data, backward.reflected(T));
}

// --- Lyapunov iteration -----------------------------------------------------

namespace {

/// Linear matrix ODE dP/dt = -(A'P + PA + C'PC + K) with time-dependent
/// coefficients; `extra` adds P-dependent terms (the h2' coupling of P^0).
struct LinearCoefficients {
  Matrix a, c, k;
};

using CoefficientFn = std::function<LinearCoefficients(double t)>;
using ExtraFn = std::function<Matrix(const Matrix& p)>;

Matrix lyapunov_rhs(const LinearCoefficients& lc, const Matrix& p, const ExtraFn& extra) {
  Matrix out = lc.a.transpose() * p + p * lc.a + lc.c.transpose() * p * lc.c + lc.k;
  if (extra) out += extra(p);
  return symmetrize(out);
}

/// Backward RK4 on the given grid; returns the Hermite interpolant in t.
HermiteTrajectory backward_rk4(const std::vector<double>& grid, int n1,
                               const CoefficientFn& coeffs, const ExtraFn& extra) {
  const size_t m = grid.size();
  std::vector<Vector> values(m), derivs(m);
  auto dpdt = [&](double t, const Matrix& p) -> Matrix {
    return -lyapunov_rhs(coeffs(t), p, extra);
  };
  auto flat = [](const Matrix& x) { return Vector(Eigen::Map<const Vector>(x.data(), x.size())); };

  Matrix p = Matrix::Zero(n1, n1);
  Matrix dp = dpdt(grid[m - 1], p);
  values[m - 1] = flat(p);
  derivs[m - 1] = flat(dp);
  for (size_t j = m - 1; j-- > 0;) {
    const double t1 = grid[j + 1];
    const double h = grid[j] - t1;  // negative
    const Matrix k1 = dp;
    const Matrix k2 = dpdt(t1 + 0.5 * h, p + 0.5 * h * k1);
    const Matrix k3 = dpdt(t1 + 0.5 * h, p + 0.5 * h * k2);
    const Matrix k4 = dpdt(grid[j], p + h * k3);
    p = symmetrize(p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4));
    dp = dpdt(grid[j], p);
    values[j] = flat(p);
    derivs[j] = flat(dp);
  }
  return HermiteTrajectory(grid, std::move(values), std::move(derivs));
}

}  // namespace

LyapunovIteration lyapunov_iteration_check(const ProblemData& data,
                                           const std::vector<double>& grid,
                                           int max_iters) {
  data.check();
  if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end()) ||
      std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw Error(ErrorCode::DimensionMismatch, "grid must be strictly increasing");
  }
  const ReducedCoefficients rc = reduced_coefficients(data);
  const int n1 = data.n1;
  auto as_matrix = [n1](const Vector& v) {
    return symmetrize(Eigen::Map<const Matrix>(v.data(), n1, n1));
  };

  // P^0: perturbed Lyapunov equation with the linear bound h2'.
  const CoefficientFn init_coeffs = [&](double) {
    return LinearCoefficients{rc.As, rc.C1s, rc.Qs};
  };
  const ExtraFn init_extra = [&](const Matrix& p) -> Matrix {
    return rc.C2s.transpose() * h2_linear_bound(p, data) * rc.C2s;
  };

  LyapunovIteration out{grid, {}, {}, false};
  std::vector<HermiteTrajectory> iterates;
  iterates.push_back(backward_rk4(grid, n1, init_coeffs, init_extra));

  auto sample = [&](const HermiteTrajectory& h) {
    std::vector<Matrix> v;
    v.reserve(h.values().size());
    for (const Vector& x : h.values()) v.push_back(as_matrix(x));
    return v;
  };
  out.iterates.push_back(sample(iterates.back()));

  for (int i = 0; i < max_iters; ++i) {
    const HermiteTrajectory& current = iterates[static_cast<size_t>(i)];
    // h2(P^i) + Gamma_i equals h2(P^0) for i = 0 and h2(P^{i-1}) afterwards.
    const HermiteTrajectory& lagged = iterates[static_cast<size_t>(i == 0 ? 0 : i - 1)];
    std::optional<Matrix> warm;
    const CoefficientFn coeffs = [&](double t) {
      const Matrix p = as_matrix(current.evaluate(t));
      const AreSolution are = solve_h2(as_matrix(lagged.evaluate(t)), data, warm);
      warm = are.F2;
      const Matrix& h = are.P22;
      const Matrix denom = rc.Rs + rc.D1s.transpose() * p * rc.D1s +
                           rc.D2s.transpose() * h * rc.D2s;
      const Matrix num = rc.Bs.transpose() * p + rc.D1s.transpose() * p * rc.C1s +
                         rc.D2s.transpose() * h * rc.C2s + rc.Ls;
      const Matrix theta = -factor_positive(symmetrize(denom), "iteration Delta").solve(num);
      const Matrix qi = rc.Qs + rc.C2s.transpose() * h * rc.C2s;
      const Matrix ri = rc.Rs + rc.D2s.transpose() * h * rc.D2s;
      const Matrix si = rc.Ls + rc.D2s.transpose() * h * rc.C2s;
      return LinearCoefficients{
          rc.As + rc.Bs * theta, rc.C1s + rc.D1s * theta,
          theta.transpose() * ri * theta + si.transpose() * theta +
              theta.transpose() * si + qi};
    };
    iterates.push_back(backward_rk4(grid, n1, coeffs, {}));
    out.iterates.push_back(sample(iterates.back()));

    const auto& a = out.iterates[out.iterates.size() - 2];
    const auto& b = out.iterates.back();
    double gap = 0.0;
    for (size_t m = 0; m < a.size(); ++m) gap = std::max(gap, (a[m] - b[m]).norm());
    out.gaps.push_back(gap);
    if (gap <= 1e-10) {
      out.converged = true;
      return out;
    }
  }
  throw Error(ErrorCode::MaxItersExceeded,
              "Lyapunov iteration did not reach gap 1e-10 in " +
                  std::to_string(max_iters) + " iterations",
              std::nullopt, out.gaps.empty() ? 0.0 : out.gaps.back());
}

ReducedResiduals residuals_reduced(const std::vector<RiccatiBlocks>& points,
                                   const ProblemData& data) {
  ReducedResiduals r{0.0, 0.0};
  for (const RiccatiBlocks& p : points) {
    const FullRhs v = eval_full_rhs(p, 0.0, data);
    r.g1 = std::max(r.g1, v.g1.norm());
    r.g2 = std::max(r.g2, v.g2.norm());
  }
  return r;
}

ReducedResiduals residuals_reduced(const ReducedSolution& sol, const ProblemData& data) {
  std::vector<RiccatiBlocks> points;
  points.reserve(sol.size());
  for (size_t j = 0; j < sol.size(); ++j) {
    points.push_back({sol.P11bar()[j], sol.P12bar()[j], sol.P22bar()[j]});
  }
  return residuals_reduced(points, data);
}

void write_reduced_csv(std::ostream& out, const ReducedSolution& sol) {
  const ProblemData& d = sol.data();
  std::vector<std::string> header{"t"};
  csv::add_matrix_columns(header, "P11", d.n1, d.n1);
  csv::add_matrix_columns(header, "P12", d.n1, d.n2);
  csv::add_matrix_columns(header, "P22", d.n2, d.n2);
  header.insert(header.end(), {"delta_min", "delta_s_min"});
  csv::add_matrix_columns(header, "F1bar", d.k, d.n1);
  csv::add_matrix_columns(header, "F2bar", d.k, d.n2);
  csv::write_row(out, header);
  for (size_t j = 0; j < sol.size(); ++j) {
    std::vector<std::string> row{csv::format(sol.grid()[j])};
    csv::add_matrix_values(row, sol.P11bar()[j]);
    csv::add_matrix_values(row, sol.P12bar()[j]);
    csv::add_matrix_values(row, sol.P22bar()[j]);
    row.push_back(csv::format(sol.delta_bar_min()[j]));
    row.push_back(csv::format(sol.delta_s_min()[j]));
    csv::add_matrix_values(row, sol.F1bar()[j]);
    csv::add_matrix_values(row, sol.F2bar()[j]);
    csv::write_row(out, row);
  }
}

}  // namespace slowfast
