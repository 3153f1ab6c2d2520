#pragma once

#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace barysid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Continuous-time LTI system  x' = A x + B u,  y = C x + D u.
///
/// Dimensions are checked on construction and every entry must be finite.
/// A system with zero states is a pure gain D.
class StateSpace {
 public:
  /// SISO zero gain.
  StateSpace() : StateSpace(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), Matrix::Zero(1, 1)) {}
  StateSpace(Matrix A, Matrix B, Matrix C, Matrix D);

  static StateSpace static_gain(const Matrix& D);
  static StateSpace static_gain(double d);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& D() const { return D_; }

  Index states() const { return A_.rows(); }
  Index inputs() const { return B_.cols(); }
  Index outputs() const { return C_.rows(); }
  bool is_siso() const { return inputs() == 1 && outputs() == 1; }

  friend bool operator==(const StateSpace&, const StateSpace&) = default;

 private:
  Matrix A_, B_, C_, D_;
};

/// Uniformly sampled scalar signal. An empty sample vector is allowed so that
/// a zero-length transient can be represented.
struct SampledSignal {
  double fs = 1.0;
  Vector samples;

  SampledSignal() = default;
  SampledSignal(double fs_hz, Vector values);

  Index size() const { return samples.size(); }
  double dt() const { return 1.0 / fs; }
};

/// Uniformly sampled vector signal, one channel per row.
struct MultiSignal {
  double fs = 1.0;
  Matrix samples;  // channels x length

  Index channels() const { return samples.rows(); }
  Index size() const { return samples.cols(); }
};

/// Exact zero-order-hold equivalent of a StateSpace at a fixed step.
struct DiscreteStateSpace {
  Matrix Ad, Bd, C, D;
};

/// e^{M}, scaling and squaring with a degree-13 Pade approximant.
Matrix expm(const Matrix& M);

DiscreteStateSpace discretize_zoh(const StateSpace& sys, double dt);

/// First-order-hold (triangle hold) equivalent: the input is taken as
/// piecewise linear between samples, so
///   x_{k+1} = Ad x_k + B0 u_k + B1 (u_{k+1} - u_k).
struct DiscreteFohStateSpace {
  Matrix Ad, B0, B1, C, D;
};
DiscreteFohStateSpace discretize_foh(const StateSpace& sys, double dt);

/// C (jw I - A)^{-1} B + D by a dense LU solve.
/// Throws SingularAtFrequency when jw is (numerically) an eigenvalue of A.
ComplexMatrix freq_response(const StateSpace& sys, double omega);

/// Scalar response of a SISO system.
Complex freq_response_siso(const StateSpace& sys, double omega);

/// Zero initial state; y_0 = D u_0.
SampledSignal simulate_zoh(const StateSpace& sys, const SampledSignal& u);
MultiSignal simulate_zoh(const StateSpace& sys, const MultiSignal& u);

/// Zero initial state, piecewise-linear input; y_0 = D u_0.
MultiSignal simulate_foh(const StateSpace& sys, const MultiSignal& u);

double spectral_abscissa(const Matrix& A);
double spectral_abscissa(const StateSpace& sys);

/// Solves A X + X A^T + Q = 0 by complex Schur reduction (Bartels-Stewart).
/// Throws NumericalFailure when A and -A^T share an eigenvalue.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

double h2_norm(const StateSpace& sys);

struct LinfResult {
  double value = 0.0;
  double omega_peak = 0.0;
  std::vector<double> skipped;  // grid points that hit an undamped pole
};

inline constexpr double kDefaultLinfDensity = 2000.0;

/// Supremum of |G(jw)| over [omega_lo, omega_hi] (SISO), gridded on a log
/// scale then refined by golden-section search around the grid argmax.
/// Does not require stability.
LinfResult linf_norm(const StateSpace& sys, double omega_lo, double omega_hi,
                     double points_per_decade = kDefaultLinfDensity);

/// Logarithmically spaced grid including both end points.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

/// Series interconnection: output of `first` feeds `second`.
StateSpace series(const StateSpace& first, const StateSpace& second);

/// Parallel difference lhs - rhs (shared input, subtracted outputs).
StateSpace difference(const StateSpace& lhs, const StateSpace& rhs);

/// SISO frequency response evaluator. A is reduced once to upper Hessenberg
/// form so each evaluation costs O(n^2). Thread-safe for concurrent
/// evaluate() calls.
class FrequencyResponseEvaluator {
 public:
  explicit FrequencyResponseEvaluator(const StateSpace& sys);

  /// Throws SingularAtFrequency at an undamped pole.
  Complex evaluate(double omega) const;

  Index states() const { return H_.rows(); }

 private:
  Matrix H_;
  Vector b_;
  RowVector c_;
  double d_ = 0.0;
  double scale_ = 0.0;
};

}  // namespace barysid
