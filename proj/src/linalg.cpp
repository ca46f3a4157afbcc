#include "slowfast/linalg.hpp"

#include "slowfast/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

namespace slowfast {

namespace {

void require_square(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(name) + " must be square, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, what);
  }
}

}  // namespace

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

bool is_symmetric(const Matrix& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  return max_abs(m - m.transpose()) <= 1e-12 * (1.0 + max_abs(m));
}

Matrix lyapunov_operator_matrix(const Matrix& a, const Matrix& c) {
  require_square(a, "A");
  require_square(c, "C");
  require_same_shape(a, c, "A and C must have the same dimension");
  const Eigen::Index n = a.rows();
  const Eigen::Index nn = n * n;
  Matrix op = Matrix::Zero(nn, nn);
  // vec(A'X) = (I (x) A') vec X, vec(XA) = (A' (x) I) vec X,
  // vec(C'XC) = (C' (x) C') vec X.
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index l = 0; l < n; ++l) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
          double v = c(l, j) * c(k, i);
          if (j == l) v += a(k, i);
          if (i == k) v += a(l, j);
          op(j * n + i, l * n + k) = v;
        }
      }
    }
  }
  return op;
}

Matrix solve_stochastic_lyapunov(const Matrix& a, const Matrix& c,
                                 const Matrix& q) {
  require_square(q, "Q");
  require_same_shape(a, q, "A and Q must have the same dimension");
  const Eigen::Index n = a.rows();
  const Matrix op = lyapunov_operator_matrix(a, c);

  Eigen::FullPivLU<Matrix> lu(op);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularOperator,
                "Lyapunov operator X -> A'X + XA + C'XC is singular");
  }
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  Vector x = lu.solve(rhs);
  // One step of iterative refinement keeps residuals near machine precision
  // for moderately conditioned operators.
  x += lu.solve(rhs - op * x);
  Matrix result = Eigen::Map<const Matrix>(x.data(), n, n);
  return symmetrize(result);
}

double spectral_abscissa(const Matrix& a) {
  require_square(a, "A");
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

StabilityReport is_l2_stable(const Matrix& a, const Matrix& c) {
  const Matrix op = lyapunov_operator_matrix(a, c);
  StabilityReport report{spectral_abscissa(op), false, std::nullopt};
  report.l2_stable = report.spectral_abscissa < -1e-10;
  if (report.l2_stable) {
    report.lyapunov_witness = solve_stochastic_lyapunov(
        a, c, Matrix::Identity(a.rows(), a.cols()));
  }
  return report;
}

double min_eigenvalue(const Matrix& m) {
  require_square(m, "M");
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_psd(const Matrix& m, double tol) {
  return min_eigenvalue(m) >= -tol * (1.0 + max_abs(m));
}

double condition_number(const Matrix& m) {
  require_square(m, "M");
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

}  // namespace slowfast
