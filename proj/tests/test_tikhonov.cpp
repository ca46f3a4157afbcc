#include "doctest.h"
#include "oracles.hpp"

#include "slowfast/errors.hpp"
#include "slowfast/tikhonov.hpp"

#include <cmath>
#include <sstream>

using namespace slowfast;

TEST_CASE("slope fit on synthetic tables") {
  ErrorTable t;
  t.epsilons = {0.1, 0.05, 0.025, 0.0125};
  for (double e : t.epsilons) {
    t.sup_err_11.push_back(3 * e);
    t.sup_err_12.push_back(0.5 * e * e);
    t.sup_err_22.push_back(7 * e);
  }
  const ConvergenceSlopes s = fit_convergence_order(t);
  CHECK(std::abs(s.slope_11 - 1.0) <= 1e-12);
  CHECK(std::abs(s.slope_12 - 2.0) <= 1e-12);
  CHECK(std::abs(s.slope_22 - 1.0) <= 1e-12);
}

TEST_CASE("slope fit refuses data below the noise floor") {
  const std::vector<double> eps{0.1, 0.05, 0.025, 0.0125};
  CHECK(std::abs(fit_log_slope(eps, {1e-3, 5e-4, 2.5e-4, 1e-15}) - 1.0) <= 1e-12);
  try {
    fit_log_slope(eps, {1e-3, 5e-4, 1e-14, 1e-15});
    FAIL("expected NoiseFloor");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoiseFloor);
  }
}

TEST_CASE("single-epsilon sweep: one row, zero terminal error") {
  const ErrorTable t = sweep_epsilon(oracle::s1(), {0.1}, 501);
  REQUIRE(t.epsilons.size() == 1);
  CHECK(t.terminal_err[0][0] == 0.0);
  CHECK(t.terminal_err[0][1] == 0.0);
  CHECK(t.terminal_err[0][2] == 0.0);
  try {
    fit_convergence_order(t);
    FAIL("expected NoiseFloor");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoiseFloor);
  }
}

TEST_CASE("sweep properties on S1 and S2") {
  for (const ProblemData& d : {oracle::s1(), oracle::s2()}) {
    const std::vector<double> eps{0.1, 0.05, 0.025};
    const ErrorTable t = sweep_epsilon(d, eps, 2001);
    const ErrorTable fine = sweep_epsilon(d, eps, 4001);
    for (size_t e = 0; e < eps.size(); ++e) {
      CHECK(t.sup_err_22[e] <= t.raw_sup_err_22[e]);
      CHECK(t.sup_err_12[e] <= t.raw_sup_err_12[e]);
      CHECK(std::abs(fine.sup_err_11[e] - t.sup_err_11[e]) <= 0.05 * t.sup_err_11[e]);
      CHECK(std::abs(fine.sup_err_12[e] - t.sup_err_12[e]) <= 0.05 * t.sup_err_12[e]);
      CHECK(std::abs(fine.sup_err_22[e] - t.sup_err_22[e]) <= 0.05 * t.sup_err_22[e]);
      if (e > 0) CHECK(t.sup_err_11[e] < t.sup_err_11[e - 1]);
    }
  }
}

TEST_CASE("sweep rejects a bad ladder") {
  for (const std::vector<double>& bad : std::vector<std::vector<double>>{
           {0.1, 0.2}, {1e-5}, {2.0}, {}}) {
    try {
      sweep_epsilon(oracle::s1(), bad, 101);
      FAIL("expected EpsilonOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EpsilonOutOfRange);
    }
  }
}

TEST_CASE("integral check: decoupled fast block gives zero") {
  // No coupling and Q12 = 0: both off-diagonal blocks vanish identically,
  // and P22 equals its reduced value only away from T, so use i = 1.
  ProblemData d = oracle::s1();
  d.A12 = d.A21 = Matrix::Zero(1, 1);
  d.B1 = Matrix::Zero(1, 1);
  const IntegralError ie = integral_error_check(d, 0.1, 1, 501);
  CHECK(ie.i1 == 0.0);
  CHECK(ie.i2 > 0.0);
}

TEST_CASE("integral check: sweep and direct routes agree") {
  const ErrorTable t = sweep_epsilon(oracle::s2(), {0.1}, 1001, {1, 2});
  const IntegralError direct = integral_error_check(oracle::s2(), 0.1, 2, 1001);
  CHECK(t.integral[0][1].i1 == doctest::Approx(direct.i1).epsilon(1e-12));
  CHECK(t.integral[0][1].i2 == doctest::Approx(direct.i2).epsilon(1e-12));
}

TEST_CASE("error table CSV and slopes JSON") {
  const ErrorTable t = sweep_epsilon(oracle::s1(), {0.1, 0.05, 0.025}, 201, {1});
  std::ostringstream csv, json;
  write_error_table_csv(csv, t);
  write_slopes_json(json, t, fit_convergence_order(t));
  CHECK(csv.str().rfind("epsilon,sup_err_11,sup_err_12,sup_err_22,integral_j1_i1,integral_j1_i2\n", 0) == 0);
  CHECK(json.str().find("\"slope_11\"") != std::string::npos);
}
