#include "doctest.h"
#include "oracles.hpp"

#include "slowfast/boundary_layer.hpp"
#include "slowfast/errors.hpp"

#include <cmath>
#include <random>

using namespace slowfast;

namespace {
const double r2 = std::sqrt(2.0);
Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

BoundaryTrajectory s1_layer(double tau_max, double scale = 1.0) {
  return solve_boundary_layer(scalar(0), scale * scalar(-(1 - 1 / r2)), scale * scalar(-(r2 - 1)),
                              tau_max, oracle::s1());
}
}  // namespace

TEST_CASE("S1 layer: closed-form tanh solution") {
  const BoundaryTrajectory b = s1_layer(10.0);
  auto exact = [](double tau) {
    return r2 * std::tanh(r2 * tau + std::atanh(1 / r2)) - 1 - (r2 - 1);
  };
  double at_nodes = 0, between = 0;
  for (size_t i = 0; i < b.tau_grid.size(); ++i) {
    at_nodes = std::max(at_nodes, std::abs(b.P22hat[i](0, 0) - exact(b.tau_grid[i])));
  }
  for (double tau = 0; tau <= 10.0; tau += 0.0137) {
    between = std::max(between, std::abs(b.evaluate(tau).second(0, 0) - exact(tau)));
  }
  CHECK(at_nodes <= 1e-9);
  CHECK(between <= 1e-8);
  CHECK(b.P12hat.back().norm() <= 1e-5);
  CHECK(b.P22hat.back().norm() <= 1e-8);
  CHECK(b.h2(0, 0) == doctest::Approx(r2 - 1).epsilon(1e-12));
  CHECK(b.h1(0, 0) == doctest::Approx(1 - 1 / r2).epsilon(1e-12));
}

TEST_CASE("S1 layer: decay rates") {
  const BoundaryTrajectory b = s1_layer(20.0 / r2);
  const auto [r12, r22] = estimate_decay_rate(b);
  CHECK(std::abs(r22 - 2 * r2) <= 0.05 * 2 * r2);
  CHECK(std::abs(r12 - r2) <= 0.05 * r2);
  CHECK(r22 >= 1.5 * r2);
  CHECK(b.fitted_rate_22 == r22);
}

TEST_CASE("zero displacement stays at the equilibrium") {
  for (const ProblemData& d : {oracle::s1(), oracle::s2()}) {
    const BoundaryTrajectory b = solve_boundary_layer(scalar(0.3), scalar(0), scalar(0), 5.0, d);
    for (size_t i = 0; i < b.tau_grid.size(); ++i) {
      CHECK(b.P12hat[i].norm() == 0.0);
      CHECK(b.P22hat[i].norm() == 0.0);
    }
    CHECK(std::isnan(b.fitted_rate_22));
    try {
      estimate_decay_rate(b);
      FAIL("expected ZeroDisplacement");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ZeroDisplacement);
    }
  }
}

TEST_CASE("equilibrium residual vanishes for random PSD slow blocks") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const ProblemData d = oracle::random_problem(rng, 1 + trial % 2, 1 + trial % 3, 1);
    if (!validate(d).overall_pass) continue;
    const Matrix p11 = oracle::random_psd(rng, d.n1, 0.5);
    const Matrix h2 = solve_h2(p11, d).P22;
    const FullRhs r = eval_full_rhs({p11, compute_p12(p11, h2, d), h2}, 0.0, d);
    CHECK(r.g1.norm() <= 1e-9);
    CHECK(r.g2.norm() <= 1e-9);
  }
}

TEST_CASE("attraction and decay envelope for scaled displacements") {
  for (const ProblemData& d : {oracle::s1(), oracle::s2()}) {
    const ReducedSolution red = solve_reduced_dre(d);
    const double gamma = std::abs(red.closed_loop_abscissa().back());
    for (double scale : {0.1, 0.5, 1.0}) {
      const BoundaryTrajectory b =
          solve_boundary_layer(scalar(0), -scale * red.P12bar().back(),
                               -scale * red.P22bar().back(), 20.0, d);
      CHECK(b.P12hat.back().norm() <= 1e-8);
      CHECK(b.P22hat.back().norm() <= 1e-8);
      for (size_t i = 0; i < b.tau_grid.size(); ++i) {
        CHECK(b.P22hat[i](0, 0) + b.h2(0, 0) >= -1e-9);
      }
      if (scale == 0.1) {
        const double p0 = b.P22hat.front().norm();
        for (size_t i = 0; i < b.tau_grid.size(); ++i) {
          const double tau = b.tau_grid[i];
          if (tau < 10.0) continue;
          CHECK(b.P22hat[i].norm() <= 1.1 * std::exp(-1.4 * gamma * tau) * p0);
        }
      }
    }
  }
}

TEST_CASE("divergence is reported") {
  // On S1, W = P22hat + sqrt(2) obeys W' = 2 - W^2; starting below
  // -sqrt(2) it escapes to -infinity in finite time.
  try {
    solve_boundary_layer(scalar(0), scalar(0), scalar(-5.0), 20.0, oracle::s1());
    FAIL("expected Divergence or DeltaNotPositive");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::Divergence || e.code() == ErrorCode::DeltaNotPositive ||
           e.code() == ErrorCode::StepSizeUnderflow));
  }
}

TEST_CASE("composite approximation at the ends of the interval") {
  for (const ProblemData& d : {oracle::s1(), oracle::s2()}) {
    const ReducedSolution red = solve_reduced_dre(d);
    const CompositeApproximation c(red, terminal_boundary_layer(red), 0.05);
    const RiccatiBlocks end = c.evaluate(d.T);
    CHECK(end.P11.norm() == 0.0);
    CHECK(end.P12.norm() == 0.0);
    CHECK(end.P22.norm() == 0.0);
    const RiccatiBlocks start = c.evaluate(0.0);
    CHECK(start.P12 == red.P12bar().front());
    CHECK(start.P22 == red.P22bar().front());
    const RiccatiBlocks mid = composite_approximation(red, 0.05, 0.9);
    CHECK(std::isfinite(mid.P12.norm()));
  }
}
