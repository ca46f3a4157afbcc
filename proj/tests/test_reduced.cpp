#include "doctest.h"
#include "oracles.hpp"

#include "slowfast/errors.hpp"
#include "slowfast/reduced.hpp"

#include <cmath>
#include <random>

using namespace slowfast;

namespace {

const double kP11Closed = std::sqrt(0.75) * std::tanh(std::sqrt(3.0));

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// Slow block decoupled from control and fast state: the iteration's gain
/// is identically zero.
ProblemData decoupled() {
  ProblemData d = oracle::s2();
  d.B1 = scalar(0);
  d.D1 = scalar(0);
  d.A12 = d.A21 = scalar(0);
  d.C12 = d.C21 = scalar(0);
  return d;
}

}  // namespace

TEST_CASE("h2 on S1: closed form") {
  const AreSolution a = solve_h2(scalar(0), oracle::s1());
  CHECK(std::abs(a.P22(0, 0) - (std::sqrt(2.0) - 1)) <= 1e-11);
  CHECK(std::abs(a.F2(0, 0) + (std::sqrt(2.0) - 1)) <= 1e-11);
  CHECK(std::abs(a.closed_loop_abscissa + std::sqrt(2.0)) <= 1e-9);
}

TEST_CASE("h2 on S2: bisection and symbolic values") {
  const ProblemData d = oracle::s2();
  const double symbolic[] = {0.43992666517986367195, 0.44041659617744005539,
                             0.44089965709959729597};
  int i = 0;
  for (double p : {0.0, 0.5, 1.0}) {
    const double got = solve_h2(scalar(p), d).P22(0, 0);
    CHECK(std::abs(got - oracle::scalar_h2_bisect(p, d)) <= 1e-9);
    CHECK(std::abs(got - symbolic[i++]) <= 1e-12);
  }
}

TEST_CASE("h2: warm start gives the same root") {
  const ProblemData d = oracle::s2();
  const AreSolution cold = solve_h2(scalar(0.5), d);
  const AreSolution warm = solve_h2(scalar(0.5), d, cold.F2);
  CHECK(std::abs(cold.P22(0, 0) - warm.P22(0, 0)) <= 1e-13);
  CHECK(warm.newton_iters <= cold.newton_iters);
  // A destabilizing warm start falls back to the cold start.
  const AreSolution bad = solve_h2(scalar(0.5), d, scalar(50.0));
  CHECK(std::abs(bad.P22(0, 0) - cold.P22(0, 0)) <= 1e-12);
}

TEST_CASE("h2: random problems satisfy the ARE with a stabilizing gain") {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int n1 = 1 + trial % 2, n2 = 1 + trial % 3;
    const ProblemData d = oracle::random_problem(rng, n1, n2, 1 + trial % 2);
    if (!validate(d).overall_pass) continue;
    const Matrix p11 = oracle::random_psd(rng, n1, 0.5);
    const AreSolution a = solve_h2(p11, d);
    CHECK(max_abs(are_residual(p11, a.P22, d)) <= 1e-10 * (1 + max_abs(a.P22)));
    CHECK(a.closed_loop_abscissa < 0);
    CHECK(min_eigenvalue(a.P22) > 0);
    CHECK(max_abs(a.F2 - fast_gain(p11, a.P22, d)) <= 1e-12 * (1 + max_abs(a.F2)));
    ++checked;
  }
  CHECK(checked > 20);
}

TEST_CASE("h2: no stabilizing solution when the fast block is unstabilizable") {
  ProblemData d = oracle::s1();
  d.A22 = scalar(1.0);
  d.B2 = scalar(0.0);
  try {
    solve_h2(scalar(0), d);
    FAIL("expected NoStabilizingSolution");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoStabilizingSolution);
  }
}

TEST_CASE("h2 monotone and dominated by the linear bound") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n1 = trial < 50 ? 1 : 2;
    ProblemData d = trial % 2 ? oracle::s2() : oracle::s1();
    if (n1 == 2) {
      d = oracle::random_problem(rng, 2, 1 + trial % 2, 1);
      if (!validate(d).overall_pass) continue;
    }
    const Matrix p = oracle::random_psd(rng, n1, 0.6);
    const Matrix q = p + oracle::random_psd(rng, n1, 0.6);
    const Matrix hp = solve_h2(p, d).P22, hq = solve_h2(q, d).P22;
    CHECK(min_eigenvalue(hq - hp) >= -1e-9);
    CHECK(min_eigenvalue(h2_linear_bound(p, d) - hp) >= -1e-9);
  }
}

TEST_CASE("h2 linear bound: S2 at zero") {
  CHECK(h2_linear_bound(scalar(0), oracle::s2())(0, 0) ==
        doctest::Approx(1.0 / 1.75).epsilon(1e-14));
}

TEST_CASE("reduced DRE on S1: closed forms") {
  const ProblemData d = oracle::s1();
  const ReducedSolution r = solve_reduced_dre(d);
  CHECK(std::abs(r.P11bar().front()(0, 0) - kP11Closed) <= 1e-9);
  CHECK(std::abs(r.P12bar().front()(0, 0) - 0.62983763249206758243) <= 1e-9);
  CHECK(std::abs(r.P12bar().back()(0, 0) - (1 - 1 / std::sqrt(2.0))) <= 1e-12);
  CHECK(std::abs(r.P22bar().back()(0, 0) - (std::sqrt(2.0) - 1)) <= 1e-12);
  CHECK(std::abs(r.F1bar().front()(0, 0) + 1.4432934057608307752) <= 1e-9);
  CHECK(r.P11bar().back()(0, 0) == 0.0);
  // interior point: P(t) = sqrt(.75) tanh(sqrt(3)(T - t))
  const double t = 0.37;
  CHECK(std::abs(r.evaluate_p11(t)(0, 0) -
                 std::sqrt(0.75) * std::tanh(std::sqrt(3.0) * (1 - t))) <= 1e-9);
}

TEST_CASE("reduced DRE on S2: RK4 oracle with symbolic reduced coefficients") {
  const ProblemData d = oracle::s2();
  // As=1, Bs=2, C1s=.3, C2s=.6, D1s=.2, D2s=.7, Qs=2, Ls=1, Rs=2
  auto g = [&](double p) {
    const double h = oracle::scalar_h2_bisect(p, d);
    const double m = 2 * p + 0.2 * p * 0.3 + 0.7 * h * 0.6 + 1;
    return 2 * p + 0.09 * p + 0.36 * h + 2 - m * m / (2 + 0.04 * p + 0.49 * h);
  };
  const double want = oracle::rk4_scalar(g, 0.0, d.T, 1e-3);
  CHECK(std::abs(solve_reduced_dre(d).P11bar().front()(0, 0) - want) <= 1e-8);
}

TEST_CASE("reduced solution: g1 = g2 = 0 and gain identities along the trajectory") {
  for (const ProblemData& d : {oracle::s1(), oracle::s2()}) {
    const ReducedSolution r = solve_reduced_dre(d);
    const ReducedResiduals res = residuals_reduced(r, d);
    CHECK(res.g1 <= 1e-8);
    CHECK(res.g2 <= 1e-8);
    const ReducedCoefficients rc = reduced_coefficients(d);
    const Matrix ia = d.A22.inverse();
    const Matrix I = Matrix::Identity(d.k, d.k);
    for (size_t j = 0; j < r.size(); ++j) {
      const Matrix& p11 = r.P11bar()[j];
      const Matrix& p22 = r.P22bar()[j];
      const Matrix& f1 = r.F1bar()[j];
      const Matrix& f2 = r.F2bar()[j];
      const Matrix cl = d.A22 + d.B2 * f2;
      const Matrix m = I + f2 * ia * d.B2;
      CHECK(max_abs(m.inverse() - (I - f2 * cl.inverse() * d.B2)) <= 1e-10);
      CHECK(max_abs(cl.inverse() - (ia - ia * d.B2 * m.inverse() * f2 * ia)) <= 1e-10);
      const Matrix ds = delta_s(p11, p22, rc);
      CHECK(max_abs(m.transpose() * delta_bar(p11, p22, d) * m - ds) <= 1e-10);
      const Matrix ms = rc.Bs.transpose() * p11 + rc.D1s.transpose() * p11 * rc.C1s +
                        rc.D2s.transpose() * p22 * rc.C2s + rc.Ls;
      CHECK(max_abs(ds * m.inverse() * (f1 - f2 * ia * d.A21) + ms) <= 1e-10);
      // same gains from the partitioned formula at eps = 0
      const FeedbackGains g = feedback_gains_full({p11, r.P12bar()[j], p22}, 0.0, d);
      CHECK(max_abs(g.F1 - f1) <= 1e-12);
      CHECK(max_abs(g.F2 - f2) <= 1e-12);
      CHECK(r.delta_bar_min()[j] > 0);
      CHECK(r.delta_s_min()[j] > 0);
      CHECK(r.closed_loop_abscissa()[j] < 0);
    }
  }
}

TEST_CASE("residuals at the all-zero triple") {
  const ReducedResiduals r =
      residuals_reduced(std::vector<RiccatiBlocks>{{scalar(0), scalar(0), scalar(0)}}, oracle::s1());
  CHECK(r.g1 == doctest::Approx(0.0));
  CHECK(r.g2 == doctest::Approx(1.0));
}

TEST_CASE("compute_p12 zeroes g1 at eps = 0") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const ProblemData d = oracle::random_problem(rng, 2, 2, 1);
    if (!validate(d).overall_pass) continue;
    const Matrix p11 = oracle::random_psd(rng, 2, 0.5);
    const Matrix h2 = solve_h2(p11, d).P22;
    const Matrix p12 = compute_p12(p11, h2, d);
    const FullRhs r = eval_full_rhs({p11, p12, h2}, 0.0, d);
    CHECK(r.g1.norm() <= 1e-9);
    CHECK(r.g2.norm() <= 1e-9);
  }
}

TEST_CASE("Lyapunov iteration: converges to the reduced solution, monotone") {
  for (const ProblemData& d : {oracle::s1(), oracle::s2()}) {
    std::vector<double> grid(401);
    for (size_t i = 0; i < grid.size(); ++i) grid[i] = d.T * i / (grid.size() - 1);
    const LyapunovIteration it = lyapunov_iteration_check(d, grid, 30);
    CHECK(it.converged);
    const ReducedSolution r = solve_reduced_dre(d);
    double gap = 0;
    for (size_t m = 0; m < grid.size(); ++m) {
      gap = std::max(gap, (it.iterates.back()[m] - r.evaluate_p11(grid[m])).norm());
    }
    CHECK(gap <= 1e-8);
    for (size_t i = 0; i + 1 < it.iterates.size(); ++i) {
      for (size_t m = 0; m < grid.size(); ++m) {
        CHECK(min_eigenvalue(it.iterates[i][m] - it.iterates[i + 1][m]) >= -1e-9);
      }
    }
  }
}

TEST_CASE("Lyapunov iteration: decoupled slow block settles at once") {
  std::vector<double> grid(201);
  for (size_t i = 0; i < grid.size(); ++i) grid[i] = i / 200.0;
  const LyapunovIteration it = lyapunov_iteration_check(decoupled(), grid, 30);
  CHECK(it.converged);
  CHECK(it.gaps.size() <= 2);
}

TEST_CASE("Lyapunov iteration: max iterations") {
  std::vector<double> grid(101);
  for (size_t i = 0; i < grid.size(); ++i) grid[i] = i / 100.0;
  try {
    lyapunov_iteration_check(oracle::s2(), grid, 1);
    FAIL("expected MaxItersExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MaxItersExceeded);
    REQUIRE(e.value().has_value());
    CHECK(*e.value() > 1e-10);
  }
}

TEST_CASE("compute_p12: singular closed loop") {
  ProblemData d = oracle::s1();
  d.B2 = scalar(0.0);
  d.A22 = scalar(0.0);
  try {
    compute_p12(scalar(0), scalar(1), d);
    FAIL("expected SingularClosedLoop");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularClosedLoop);
  }
}
