#pragma once

#include <Eigen/Dense>

#include <optional>

namespace slowfast {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Certificate for mean-square stability of dX = A X dt + C X dW.
struct StabilityReport {
  double spectral_abscissa;  ///< of the vectorized operator X -> A'X + XA + C'XC
  bool l2_stable;
  std::optional<Matrix> lyapunov_witness;  ///< Y solving A'Y + YA + C'YC + I = 0
};

/// (M + M') / 2.
Matrix symmetrize(const Matrix& m);

/// Largest absolute entry; 0 for empty matrices.
double max_abs(const Matrix& m);

/// True when max |M - M'| <= 1e-12 (1 + max|M|) and all entries are finite.
bool is_symmetric(const Matrix& m);

/// n^2 x n^2 matrix L with L vec(X) = vec(A'X + XA + C'XC), column-major vec.
Matrix lyapunov_operator_matrix(const Matrix& a, const Matrix& c);

/// Solves A'X + XA + C'XC + Q = 0 by one dense solve of the vectorized
/// system. Throws SingularOperator when the operator is rank-deficient.
Matrix solve_stochastic_lyapunov(const Matrix& a, const Matrix& c,
                                 const Matrix& q);

/// max Re(lambda) over the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix& a);

StabilityReport is_l2_stable(const Matrix& a, const Matrix& c);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m);

/// M is treated as PSD iff min_eigenvalue(M) >= -tol (1 + max|M|).
bool is_psd(const Matrix& m, double tol = 1e-9);

/// 2-norm condition number; +inf for singular matrices.
double condition_number(const Matrix& m);

}  // namespace slowfast
