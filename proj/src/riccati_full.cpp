#include "slowfast/riccati_full.hpp"

#include "slowfast/csv.hpp"
#include "slowfast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace slowfast {

namespace {

constexpr double kDeltaFloor = 1e-12;

struct DeltaParts {
  Matrix delta;
  Matrix n1;  ///< k x n1 bracket shared by f and g1
  Matrix n2;  ///< k x n2 bracket shared by g1 and g2
};

DeltaParts delta_parts(const RiccatiBlocks& p, double eps, const ProblemData& d,
                       bool with_r = true) {
  const double se = std::sqrt(eps);
  const Matrix p21 = p.P12.transpose();
  DeltaParts out;
  out.delta = d.D1.transpose() * p.P11 * d.D1 +
              se * (d.D2.transpose() * p21 * d.D1 + d.D1.transpose() * p.P12 * d.D2) +
              d.D2.transpose() * p.P22 * d.D2;
  if (with_r) out.delta += d.R;
  out.delta = symmetrize(out.delta);
  out.n1 = d.B1.transpose() * p.P11 + d.B2.transpose() * p21 +
           d.D1.transpose() * p.P11 * d.C11 +
           se * (d.D2.transpose() * p21 * d.C11 + d.D1.transpose() * p.P12 * d.C21) +
           d.D2.transpose() * p.P22 * d.C21;
  out.n2 = eps * d.B1.transpose() * p.P12 + d.B2.transpose() * p.P22 +
           d.D1.transpose() * p.P11 * d.C12 +
           se * (d.D2.transpose() * p21 * d.C12 + d.D1.transpose() * p.P12 * d.C22) +
           d.D2.transpose() * p.P22 * d.C22;
  return out;
}

Eigen::LDLT<Matrix> factor_delta(const Matrix& delta) {
  const double lam = min_eigenvalue(delta);
  if (!(lam > kDeltaFloor)) {
    throw Error(ErrorCode::DeltaNotPositive,
                "R + D'PD lost positive definiteness (min eig " +
                    std::to_string(lam) + ")");
  }
  return Eigen::LDLT<Matrix>(delta);
}

/// The part of f, g1, g2 that is linear in P (no Q, no quadratic term).
FullRhs linear_terms(const RiccatiBlocks& p, double eps, const ProblemData& d) {
  const double se = std::sqrt(eps);
  const Matrix p21 = p.P12.transpose();
  FullRhs out;
  out.f = d.A11.transpose() * p.P11 + p.P11 * d.A11 + d.A21.transpose() * p21 +
          p.P12 * d.A21 + d.C11.transpose() * p.P11 * d.C11 +
          se * (d.C21.transpose() * p21 * d.C11 + d.C11.transpose() * p.P12 * d.C21) +
          d.C21.transpose() * p.P22 * d.C21;
  out.g1 = eps * d.A11.transpose() * p.P12 + p.P11 * d.A12 +
           d.A21.transpose() * p.P22 + p.P12 * d.A22 +
           d.C11.transpose() * p.P11 * d.C12 +
           se * (d.C21.transpose() * p21 * d.C12 + d.C11.transpose() * p.P12 * d.C22) +
           d.C21.transpose() * p.P22 * d.C22;
  out.g2 = d.A22.transpose() * p.P22 + p.P22 * d.A22 +
           eps * (d.A12.transpose() * p.P12 + p21 * d.A12) +
           d.C12.transpose() * p.P11 * d.C12 +
           se * (d.C22.transpose() * p21 * d.C12 + d.C12.transpose() * p.P12 * d.C22) +
           d.C22.transpose() * p.P22 * d.C22;
  return out;
}

}  // namespace

Matrix delta_full(const RiccatiBlocks& p, double epsilon, const ProblemData& data) {
  return delta_parts(p, epsilon, data).delta;
}

FullRhs eval_full_rhs(const RiccatiBlocks& p, double eps, const ProblemData& d) {
  const DeltaParts parts = delta_parts(p, eps, d);
  const auto ldlt = factor_delta(parts.delta);
  const Matrix inv_n1 = ldlt.solve(parts.n1);
  const Matrix inv_n2 = ldlt.solve(parts.n2);
  FullRhs out = linear_terms(p, eps, d);
  out.f = symmetrize(out.f + d.Q11() - parts.n1.transpose() * inv_n1);
  out.g1 += d.Q12() - parts.n1.transpose() * inv_n2;
  out.g2 = symmetrize(out.g2 + d.Q22() - parts.n2.transpose() * inv_n2);
  return out;
}

FullRhs eval_full_rhs_increment(const RiccatiBlocks& base, const RiccatiBlocks& dp,
                                double eps, const ProblemData& d) {
  // With N = Nb + Nd and Delta = Db + Dd (Nd, Dd linear in dp):
  //   N'(Db+Dd)^{-1}N - Nb'Db^{-1}Nb
  //     = Nb'Db^{-1}Nd + Nd'Db^{-1}Nb + Nd'Db^{-1}Nd - N'Db^{-1}Dd(Db+Dd)^{-1}N
  // Every term carries a factor of dp, so small increments keep full
  // relative accuracy.
  const DeltaParts b = delta_parts(base, eps, d);
  const DeltaParts inc = delta_parts(dp, eps, d, false);
  const auto base_ldlt = factor_delta(b.delta);
  const auto full_ldlt = factor_delta(symmetrize(b.delta + inc.delta));
  const Matrix n1 = b.n1 + inc.n1;
  const Matrix n2 = b.n2 + inc.n2;
  auto quad = [&](const Matrix& nb_a, const Matrix& nd_a, const Matrix& n_a,
                  const Matrix& nb_b, const Matrix& nd_b, const Matrix& n_b) -> Matrix {
    return nb_a.transpose() * base_ldlt.solve(nd_b) +
           nd_a.transpose() * base_ldlt.solve(nb_b) +
           nd_a.transpose() * base_ldlt.solve(nd_b) -
           n_a.transpose() * base_ldlt.solve(inc.delta * full_ldlt.solve(n_b));
  };
  FullRhs out = linear_terms(dp, eps, d);
  out.f = symmetrize(out.f - quad(b.n1, inc.n1, n1, b.n1, inc.n1, n1));
  out.g1 -= quad(b.n1, inc.n1, n1, b.n2, inc.n2, n2);
  out.g2 = symmetrize(out.g2 - quad(b.n2, inc.n2, n2, b.n2, inc.n2, n2));
  return out;
}

Matrix assemble_P(const RiccatiBlocks& p, double eps) {
  const auto n1 = p.P11.rows();
  const auto n2 = p.P22.rows();
  if (p.P12.rows() != n1 || p.P12.cols() != n2) {
    throw Error(ErrorCode::DimensionMismatch, "P12 shape inconsistent with P11/P22");
  }
  Matrix out(n1 + n2, n1 + n2);
  out.topLeftCorner(n1, n1) = p.P11;
  out.topRightCorner(n1, n2) = eps * p.P12;
  out.bottomLeftCorner(n2, n1) = eps * p.P12.transpose();
  out.bottomRightCorner(n2, n2) = eps * p.P22;
  return out;
}

FeedbackGains feedback_gains_full(const RiccatiBlocks& p, double eps,
                                  const ProblemData& d) {
  const DeltaParts parts = delta_parts(p, eps, d);
  const auto ldlt = factor_delta(parts.delta);
  return {-ldlt.solve(parts.n1), -ldlt.solve(parts.n2)};
}

Vector pack_blocks(const RiccatiBlocks& p) {
  const auto s11 = p.P11.size(), s12 = p.P12.size(), s22 = p.P22.size();
  Vector y(s11 + s12 + s22);
  y.segment(0, s11) = Eigen::Map<const Vector>(p.P11.data(), s11);
  y.segment(s11, s12) = Eigen::Map<const Vector>(p.P12.data(), s12);
  y.segment(s11 + s12, s22) = Eigen::Map<const Vector>(p.P22.data(), s22);
  return y;
}

RiccatiBlocks unpack_blocks(const Vector& y, int n1, int n2) {
  const Eigen::Index s11 = n1 * n1, s12 = n1 * n2, s22 = n2 * n2;
  if (y.size() != s11 + s12 + s22) {
    throw Error(ErrorCode::DimensionMismatch, "state vector length mismatch");
  }
  return {Eigen::Map<const Matrix>(y.data(), n1, n1),
          Eigen::Map<const Matrix>(y.data() + s11, n1, n2),
          Eigen::Map<const Matrix>(y.data() + s11 + s12, n2, n2)};
}

RiccatiTrajectory::RiccatiTrajectory(double epsilon, int n1, int n2,
                                     HermiteTrajectory dense,
                                     std::vector<double> delta_min)
    : epsilon_(epsilon),
      n1_(n1),
      n2_(n2),
      dense_(std::move(dense)),
      delta_min_(std::move(delta_min)) {}

RiccatiBlocks RiccatiTrajectory::at(size_t i) const {
  return unpack_blocks(dense_.values().at(i), n1_, n2_);
}

RiccatiBlocks RiccatiTrajectory::evaluate(double t) const {
  return unpack_blocks(dense_.evaluate(t), n1_, n2_);
}

double RiccatiTrajectory::min_step() const {
  const auto& g = grid();
  double m = g.back() - g.front();
  for (size_t i = 1; i < g.size(); ++i) m = std::min(m, g[i] - g[i - 1]);
  return m;
}

std::vector<double> RiccatiTrajectory::steps_near_terminal(double window) const {
  const auto& g = grid();
  std::vector<double> steps;
  for (size_t i = 1; i < g.size(); ++i) {
    if (g[i - 1] >= g.back() - window) steps.push_back(g[i] - g[i - 1]);
  }
  return steps;
}

RiccatiTrajectory solve_full(const ProblemData& data, double epsilon,
                             const StepControl& control) {
  check_epsilon(epsilon);
  data.check();
  const int n1 = data.n1, n2 = data.n2;
  const double T = data.T;

  auto rhs = [&](double, const Vector& y, Vector& dy) {
    const RiccatiBlocks p = unpack_blocks(y, n1, n2);
    FullRhs r = eval_full_rhs(p, epsilon, data);
    // dP/dt = -f, eps dP12/dt = -g1, eps dP22/dt = -g2; in s = T - t the
    // signs flip.
    dy = pack_blocks({r.f, r.g1 / epsilon, r.g2 / epsilon});
  };

  std::vector<double> delta_min;
  auto hook = [&](double s, Vector& y) {
    RiccatiBlocks p = unpack_blocks(y, n1, n2);
    p.P11 = symmetrize(p.P11);
    p.P22 = symmetrize(p.P22);
    y = pack_blocks(p);
    const double lam = min_eigenvalue(delta_full(p, epsilon, data));
    if (!(lam > kDeltaFloor)) {
      throw Error(ErrorCode::DeltaNotPositive,
                  "Delta^eps lost positivity at t = " + std::to_string(T - s),
                  T - s);
    }
    delta_min.push_back(lam);
  };

  double cap = std::min(T / 100.0, epsilon / 2.0);
  if (control.max_step > 0) cap = std::min(cap, control.max_step);

  const RiccatiBlocks zero{Matrix::Zero(n1, n1), Matrix::Zero(n1, n2),
                           Matrix::Zero(n2, n2)};
  HermiteTrajectory backward;
  try {
    backward = integrate_dopri5(rhs, 0.0, T, pack_blocks(zero), control, cap, hook);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StepSizeUnderflow && e.time()) {
      throw Error(ErrorCode::StepSizeUnderflow,
                  "full system stalled at t = " + std::to_string(T - *e.time()),
                  T - *e.time(), epsilon);
    }
    throw;
  }
  std::reverse(delta_min.begin(), delta_min.end());
  return RiccatiTrajectory(epsilon, n1, n2, backward.reflected(T),
                           std::move(delta_min));
}

void write_full_csv(std::ostream& out, const RiccatiTrajectory& traj) {
  const RiccatiBlocks first = traj.at(0);
  std::vector<std::string> header{"t"};
  csv::add_matrix_columns(header, "P11", first.P11.rows(), first.P11.cols());
  csv::add_matrix_columns(header, "P12", first.P12.rows(), first.P12.cols());
  csv::add_matrix_columns(header, "P22", first.P22.rows(), first.P22.cols());
  header.push_back("delta_min");
  csv::write_row(out, header);
  for (size_t i = 0; i < traj.size(); ++i) {
    const RiccatiBlocks p = traj.at(i);
    std::vector<std::string> row{csv::format(traj.grid()[i])};
    csv::add_matrix_values(row, p.P11);
    csv::add_matrix_values(row, p.P12);
    csv::add_matrix_values(row, p.P22);
    row.push_back(csv::format(traj.delta_min()[i]));
    csv::write_row(out, row);
  }
}

}  // namespace slowfast
