#include <cmath>
#include <limits>

#include "barysid/errors.hpp"
#include "barysid/lti.hpp"

namespace barysid {

// Complex Schur form A = U T U^*, then the triangular Sylvester equation
// T Y + Y T^* = -U^* Q U is solved one column at a time from the right.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  const Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) {
    throw DimensionMismatch("solve_lyapunov: A and Q must be square, same size");
  }
  if (n == 0) return Matrix(0, 0);

  Eigen::ComplexSchur<ComplexMatrix> schur(A.cast<Complex>());
  if (schur.info() != Eigen::Success) {
    throw NumericalFailure("solve_lyapunov: Schur decomposition failed");
  }
  const ComplexMatrix& T = schur.matrixT();
  const ComplexMatrix& U = schur.matrixU();
  const ComplexMatrix F = -(U.adjoint() * Q.cast<Complex>() * U);

  const double scale = std::max(T.cwiseAbs().maxCoeff(), 1e-300);
  ComplexMatrix Y = ComplexMatrix::Zero(n, n);
  for (Index j = n - 1; j >= 0; --j) {
    ComplexVector rhs = F.col(j);
    for (Index k = j + 1; k < n; ++k) rhs -= std::conj(T(j, k)) * Y.col(k);
    const Complex shift = std::conj(T(j, j));
    for (Index i = n - 1; i >= 0; --i) {
      Complex s = rhs(i);
      for (Index k = i + 1; k < n; ++k) s -= T(i, k) * Y(k, j);
      const Complex piv = T(i, i) + shift;
      if (std::abs(piv) <= 1e2 * std::numeric_limits<double>::epsilon() * scale) {
        throw NumericalFailure(
            "solve_lyapunov: A has eigenvalues symmetric about the imaginary "
            "axis");
      }
      Y(i, j) = s / piv;
    }
  }
  const Matrix X = (U * Y * U.adjoint()).real();
  return 0.5 * (X + X.transpose());
}

}  // namespace barysid
