#include "doctest.h"
#include "oracles.hpp"

#include "slowfast/errors.hpp"
#include "slowfast/philox.hpp"
#include "slowfast/sde.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace slowfast;

namespace {
Vector vec(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}
}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  // Reference values distributed with the Random123 library.
  const auto z = Philox4x32(Philox4x32::Key{0, 0})({0, 0, 0, 0});
  CHECK(z == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto f = Philox4x32(Philox4x32::Key{0xffffffffu, 0xffffffffu})(
      {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
  CHECK(f == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  const auto pi = Philox4x32(Philox4x32::Key{0xa4093822u, 0x299f31d0u})(
      {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u});
  CHECK(pi == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("Philox normals: first two moments") {
  Philox4x32 g(std::uint64_t{42});
  double s = 0, ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal({static_cast<std::uint32_t>(i), 1, 0, 0});
    s += x;
    ss += x * x;
  }
  CHECK(std::abs(s / n) <= 5.0 / std::sqrt(n));
  CHECK(std::abs(ss / n - 1.0) <= 0.02);
}

TEST_CASE("zero state stays at zero") {
  const ProblemData d = oracle::s2();
  const StatePath p = simulate_path(d, 0.1, zero_gains(d), vec(0, 0), 0.005, 1);
  for (size_t i = 0; i < p.times.size(); ++i) {
    CHECK(p.X1[i].norm() == 0.0);
    CHECK(p.X2[i].norm() == 0.0);
  }
  const CostEstimate c = mc_cost(d, 0.1, zero_gains(d), vec(0, 0), 100, 0.005, 1);
  CHECK(c.mean == 0.0);
  CHECK(c.std_error == 0.0);
}

TEST_CASE("deterministic S1 path matches the matrix exponential") {
  const ProblemData d = oracle::s1();
  const double step = 1e-4;
  const StatePath p = simulate_path(d, 1.0, zero_gains(d), vec(1, 0), step, 3);
  CHECK(p.X1.front()(0) == 1.0);
  CHECK(p.X2.front()(0) == 0.0);
  Matrix A(2, 2);
  A << 0, 1, 1, -1;
  double worst = 0;
  for (size_t i = 0; i < p.times.size(); i += 100) {
    const Vector want = oracle::expm_path(A, vec(1, 0), p.times[i]);
    worst = std::max(worst, std::abs(p.X1[i](0) - want(0)) + std::abs(p.X2[i](0) - want(1)));
  }
  CHECK(worst <= 10 * step);
  const StatePath q = simulate_path(d, 1.0, zero_gains(d), vec(1, 0), step, 999);
  CHECK(q.X1.back() == p.X1.back());
  CHECK(q.X2.back() == p.X2.back());
}

TEST_CASE("deterministic S1 cost matches quadrature of the exact path") {
  const ProblemData d = oracle::s1();
  Matrix A(2, 2);
  A << 0, 1, 1, -1;
  // Simpson on the exact path, 2000 panels.
  const int n = 2000;
  double s = 0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    s += w * oracle::expm_path(A, vec(1, 0), static_cast<double>(i) / n).squaredNorm();
  }
  const double want = 0.5 * s / (3.0 * n);
  const CostEstimate c = mc_cost(d, 1.0, zero_gains(d), vec(1, 0), 4, 1e-4, 1);
  CHECK(std::abs(c.mean - want) <= 0.005 * want);
  CHECK(c.std_error == 0.0);
}

TEST_CASE("parallel and serial Monte Carlo agree bit for bit") {
  const ProblemData d = oracle::s2();
  const ReducedSolution red = solve_reduced_dre(d);
  const std::vector<double> grid = simulation_grid(d, 0.1, 0.005);
  const GainSchedule g = reduced_gain_schedule(red, grid);
  const CostEstimate serial = reference::mc_cost_serial(d, 0.1, g, vec(1, 1), 3000, 0.005, 77);
  for (int threads : {1, 2, 3, 8}) {
    omp_set_num_threads(threads);
    const CostEstimate par = mc_cost(d, 0.1, g, vec(1, 1), 3000, 0.005, 77);
    CHECK(par.mean == serial.mean);
    CHECK(par.std_error == serial.std_error);
    CHECK(par.n_paths == serial.n_paths);
  }
  const CostEstimate other = mc_cost(d, 0.1, g, vec(1, 1), 3000, 0.005, 78);
  CHECK(other.mean != serial.mean);
}

TEST_CASE("step size limit") {
  const ProblemData d = oracle::s2();
  CHECK_NOTHROW(simulation_grid(d, 0.1, 0.01));
  try {
    simulation_grid(d, 0.1, 0.0101);
    FAIL("expected StepTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepTooLarge);
  }
  const std::vector<double> g = simulation_grid(d, 0.1, 0.003);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == d.T);
  CHECK(g.size() == 335);
}

TEST_CASE("explosions are flagged and excluded") {
  ProblemData d = oracle::s1();
  d.A11(0, 0) = 40.0;  // e^{40} passes the 1e8 threshold
  const StatePath p = simulate_path(d, 1.0, zero_gains(d), vec(1, 0), 0.01, 1);
  CHECK(p.exploded);
  CHECK(std::isnan(p.cost));
  try {
    mc_cost(d, 1.0, zero_gains(d), vec(1, 0), 10, 0.01, 1);
    FAIL("expected AllPathsExploded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllPathsExploded);
  }
}

TEST_CASE("gain schedule interpolation") {
  GainSchedule g{{0.0, 1.0}, {Matrix::Constant(1, 1, 0), Matrix::Constant(1, 1, 2)},
                 {Matrix::Constant(1, 1, 4), Matrix::Constant(1, 1, 0)}, "custom"};
  const FeedbackGains a = g.at(0.25);
  CHECK(a.F1(0, 0) == doctest::Approx(0.5));
  CHECK(a.F2(0, 0) == doctest::Approx(3.0));
  CHECK(g.at(-1).F1(0, 0) == 0.0);
  CHECK(g.at(2).F2(0, 0) == 0.0);
}

TEST_CASE("optimal feedback: value identity and optimality ordering on S2") {
  const ProblemData d = oracle::s2();
  const double eps = 0.1, step = eps / 20;
  const Vector x0 = vec(1, 1);
  const RiccatiTrajectory full = solve_full(d, eps);
  const std::vector<double> grid = simulation_grid(d, eps, step);
  const GainSchedule gf = full_gains(full, d, grid);
  const CostEstimate opt = mc_cost(d, eps, gf, x0, 4000, step, 5);
  const double V = 0.5 * x0.dot(assemble_P(full.at(0), eps) * x0);
  CHECK(std::abs(opt.mean - V) <= 3 * opt.std_error + 0.02 * V);
  for (const GainSchedule& g : {zero_gains(d), reduced_gain_schedule(solve_reduced_dre(d), grid)}) {
    const CostEstimate other = mc_cost(d, eps, g, x0, 4000, step, 5);
    const double se = std::hypot(other.std_error, opt.std_error);
    CHECK(other.mean >= opt.mean - 3 * se);
  }
}

TEST_CASE("second moment under reduced feedback does not grow as eps shrinks") {
  const ProblemData d = oracle::s2();
  const ReducedSolution red = solve_reduced_dre(d);
  double base = 0;
  for (double eps : {0.1, 0.05, 0.025}) {
    const double step = eps / 20;
    const GainSchedule g = reduced_gain_schedule(red, simulation_grid(d, eps, step));
    const std::vector<double> m = mc_second_moment(d, eps, g, vec(1, 1), 1000, step, 9);
    const double sup = *std::max_element(m.begin(), m.end());
    CHECK(m.front() == doctest::Approx(2.0));
    if (eps == 0.1) base = sup;
    CHECK(sup <= 1.1 * base);
  }
}

TEST_CASE("cost-gap report: x0 = 0 and the JSON layout") {
  const ProblemData d = oracle::s1();
  const CostGapReport r = cost_gap_experiment(d, 0.1, vec(0, 0), 10, 0.005, 1);
  CHECK(r.V_eps == 0.0);
  CHECK(r.V_bar == 0.0);
  CHECK(r.J_reduced.mean == 0.0);
  CHECK(r.J_optimal.mean == 0.0);
  CHECK(r.gap_mc == 0.0);
  CHECK(r.gap_value == 0.0);
  std::ostringstream s;
  write_cost_gap_json(s, r);
  for (const char* key : {"\"epsilon\"", "\"V_eps\"", "\"V_bar\"", "\"J_reduced\"", "\"J_optimal\"", "\"gaps\""}) {
    CHECK(s.str().find(key) != std::string::npos);
  }
}

TEST_CASE("cost-gap on S1 at eps = 0.05: value gap is small and V_bar matches the closed form") {
  const CostGapReport r = cost_gap_experiment(oracle::s1(), 0.05, vec(1, 0), 10, 0.0025, 1);
  CHECK(std::abs(r.V_bar - 0.5 * std::sqrt(0.75) * std::tanh(std::sqrt(3.0))) <= 1e-9);
  CHECK(std::abs(r.gap_value) <= 0.05);  // |V_eps - V_bar| <= C eps with C = 1
}

TEST_CASE("path CSV header") {
  const ProblemData d = oracle::s2();
  std::ostringstream s;
  write_path_csv(s, simulate_path(d, 0.5, zero_gains(d), vec(1, 1), 0.05, 1));
  CHECK(s.str().rfind("t,X1_0,X2_0,U_0\n", 0) == 0);
}
