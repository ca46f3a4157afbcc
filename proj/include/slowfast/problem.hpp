#pragma once

#include "slowfast/linalg.hpp"

#include <filesystem>
#include <string>

namespace slowfast {

/// Coefficients of the slow-fast stochastic LQ problem
///
///   dX1 = (A11 X1 + A12 X2 + B1 u) dt + (C11 X1 + C12 X2 + D1 u) dW
///   dX2 = (A21 X1 + A22 X2 + B2 u) dt / eps
///         + (C21 X1 + C22 X2 + D2 u) dW / sqrt(eps)
///
/// with running cost (<Q X, X> + <R u, u>) / 2 on [0, T]. W is scalar.
struct ProblemData {
  int n1 = 0;
  int n2 = 0;
  int k = 0;
  Matrix A11, A12, A21, A22;
  Matrix B1, B2;
  Matrix C11, C12, C21, C22;
  Matrix D1, D2;
  Matrix Q;  ///< (n1 + n2) x (n1 + n2), symmetric
  Matrix R;  ///< k x k, symmetric
  double T = 1.0;

  int n() const { return n1 + n2; }
  Matrix Q11() const { return Q.topLeftCorner(n1, n1); }
  Matrix Q12() const { return Q.topRightCorner(n1, n2); }
  Matrix Q22() const { return Q.bottomRightCorner(n2, n2); }

  /// Throws DimensionMismatch (or InvalidProblem for non-finite / asymmetric
  /// data or T <= 0).
  void check() const;
};

/// Coefficients of the compact system after eps-scaling of the fast rows.
struct ScaledCoefficients {
  double epsilon;
  Matrix A, B, C, D;
};

/// Coefficients of the reduced (eps = 0) slow problem.
struct ReducedCoefficients {
  Matrix As, Bs, C1s, C2s, D1s, D2s;
  Matrix Qs, Ls, Rs;
};

struct CheckResult {
  bool pass;
  double value;  ///< min eigenvalue or condition estimate, depending on check
};

struct ValidationReport {
  CheckResult q_positive;
  CheckResult r_positive;
  CheckResult a22_invertible;
  StabilityReport fast_pair_l2_stable;
  bool overall_pass;
};

inline constexpr double kConditionLimit = 1e12;

ValidationReport validate(const ProblemData& data);

ScaledCoefficients scaled_coefficients(const ProblemData& data, double epsilon);

ReducedCoefficients reduced_coefficients(const ProblemData& data);

/// Throws EpsilonOutOfRange unless 0 < epsilon <= 1.
void check_epsilon(double epsilon);

/// Names of the failed checks ("q_positive", ...), space separated.
std::string failed_checks(const ValidationReport& report);

ProblemData load_problem(const std::filesystem::path& path);
ProblemData problem_from_json_text(const std::string& text);
std::string problem_to_json_text(const ProblemData& data);
void save_problem(const ProblemData& data, const std::filesystem::path& path);

}  // namespace slowfast
