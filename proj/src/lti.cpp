#include "barysid/lti.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "barysid/errors.hpp"
#include "barysid/kernels.hpp"

namespace barysid {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

std::string dims(const Matrix& M) {
  std::ostringstream os;
  os << M.rows() << "x" << M.cols();
  return os.str();
}

}  // namespace

StateSpace::StateSpace(Matrix A, Matrix B, Matrix C, Matrix D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
  const Index n = A_.rows();
  if (A_.cols() != n || B_.rows() != n || C_.cols() != n ||
      D_.rows() != C_.rows() || D_.cols() != B_.cols()) {
    throw DimensionMismatch("StateSpace: inconsistent dimensions A " + dims(A_) +
                            ", B " + dims(B_) + ", C " + dims(C_) + ", D " +
                            dims(D_));
  }
  if (!all_finite(A_) || !all_finite(B_) || !all_finite(C_) ||
      !all_finite(D_)) {
    throw ValidationError("StateSpace: non-finite entry");
  }
}

StateSpace StateSpace::static_gain(const Matrix& D) {
  return StateSpace(Matrix(0, 0), Matrix(0, D.cols()), Matrix(D.rows(), 0), D);
}

StateSpace StateSpace::static_gain(double d) {
  return static_gain(Matrix::Constant(1, 1, d));
}

SampledSignal::SampledSignal(double fs_hz, Vector values)
    : fs(fs_hz), samples(std::move(values)) {
  if (!(fs > 0.0) || !std::isfinite(fs)) {
    throw ValidationError("SampledSignal: sample rate must be positive");
  }
}

Matrix expm(const Matrix& M) {
  if (M.size() == 0) return M;
  return M.exp();
}

DiscreteStateSpace discretize_zoh(const StateSpace& sys, double dt) {
  const Index n = sys.states();
  const Index p = sys.inputs();
  // exp([A B; 0 0] dt) = [Ad Bd; 0 I]
  Matrix aug = Matrix::Zero(n + p, n + p);
  aug.topLeftCorner(n, n) = sys.A() * dt;
  aug.topRightCorner(n, p) = sys.B() * dt;
  const Matrix E = expm(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, p), sys.C(), sys.D()};
}

DiscreteFohStateSpace discretize_foh(const StateSpace& sys, double dt) {
  const Index n = sys.states();
  const Index p = sys.inputs();
  // exp([A B 0; 0 0 I/dt; 0 0 0] dt) = [Ad B0 B1; 0 I I; 0 0 I]
  Matrix aug = Matrix::Zero(n + 2 * p, n + 2 * p);
  aug.topLeftCorner(n, n) = sys.A() * dt;
  aug.block(0, n, n, p) = sys.B() * dt;
  aug.block(n, n + p, p, p).setIdentity();
  const Matrix E = expm(aug);
  return {E.topLeftCorner(n, n), E.block(0, n, n, p), E.block(0, n + p, n, p),
          sys.C(), sys.D()};
}

ComplexMatrix freq_response(const StateSpace& sys, double omega) {
  const Index n = sys.states();
  if (n == 0) return sys.D().cast<Complex>();
  ComplexMatrix M = -sys.A().cast<Complex>();
  M.diagonal().array() += Complex(0.0, omega);
  Eigen::PartialPivLU<ComplexMatrix> lu(M);
  const double rcond = lu.rcond();
  if (!(rcond > 1e3 * std::numeric_limits<double>::epsilon())) {
    std::ostringstream os;
    os << "jwI - A is singular at omega = " << omega << " (rcond " << rcond
       << ")";
    throw SingularAtFrequency(omega, os.str());
  }
  const ComplexMatrix X = lu.solve(sys.B().cast<Complex>());
  return sys.C().cast<Complex>() * X + sys.D().cast<Complex>();
}

Complex freq_response_siso(const StateSpace& sys, double omega) {
  if (!sys.is_siso()) throw DimensionMismatch("freq_response_siso: not SISO");
  return freq_response(sys, omega)(0, 0);
}

MultiSignal simulate_zoh(const StateSpace& sys, const MultiSignal& u) {
  if (u.channels() != sys.inputs()) {
    throw DimensionMismatch("simulate_zoh: input has " +
                            std::to_string(u.channels()) +
                            " channels, system expects " +
                            std::to_string(sys.inputs()));
  }
  const DiscreteStateSpace d = discretize_zoh(sys, 1.0 / u.fs);
  const Index len = u.size();
  MultiSignal y{u.fs, Matrix(sys.outputs(), len)};
  Vector x = Vector::Zero(sys.states());
  Vector next(sys.states());
  for (Index k = 0; k < len; ++k) {
    y.samples.col(k).noalias() = d.C * x + d.D * u.samples.col(k);
    next.noalias() = d.Ad * x + d.Bd * u.samples.col(k);
    x.swap(next);
  }
  return y;
}

MultiSignal simulate_foh(const StateSpace& sys, const MultiSignal& u) {
  if (u.channels() != sys.inputs()) {
    throw DimensionMismatch("simulate_foh: input channel count mismatch");
  }
  const DiscreteFohStateSpace d = discretize_foh(sys, 1.0 / u.fs);
  const Matrix Ba = d.B0 - d.B1;
  const Index len = u.size();
  MultiSignal y{u.fs, Matrix(sys.outputs(), len)};
  Vector x = Vector::Zero(sys.states());
  Vector next(sys.states());
  for (Index k = 0; k < len; ++k) {
    y.samples.col(k).noalias() = d.C * x + d.D * u.samples.col(k);
    if (k + 1 == len) break;
    next.noalias() = d.Ad * x + Ba * u.samples.col(k) + d.B1 * u.samples.col(k + 1);
    x.swap(next);
  }
  return y;
}

SampledSignal simulate_zoh(const StateSpace& sys, const SampledSignal& u) {
  if (!sys.is_siso()) throw DimensionMismatch("simulate_zoh: not SISO");
  MultiSignal in{u.fs, u.samples.transpose()};
  MultiSignal out = simulate_zoh(sys, in);
  return SampledSignal(u.fs, out.samples.row(0).transpose());
}

double spectral_abscissa(const Matrix& A) {
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("spectral_abscissa: eigensolver did not converge");
  }
  return es.eigenvalues().real().maxCoeff();
}

double spectral_abscissa(const StateSpace& sys) {
  return spectral_abscissa(sys.A());
}

double h2_norm(const StateSpace& sys) {
  if ((sys.D().array() != 0.0).any()) {
    throw NonzeroFeedthrough("h2_norm: D must be zero");
  }
  if (sys.states() == 0) return 0.0;
  const double sa = spectral_abscissa(sys.A());
  if (!(sa < 0.0)) {
    std::ostringstream os;
    os << "h2_norm: system is not stable (spectral abscissa " << sa << ")";
    throw UnstableSystem(os.str());
  }
  const Matrix P = solve_lyapunov(sys.A(), sys.B() * sys.B().transpose());
  const double tr = (sys.C() * P * sys.C().transpose()).trace();
  return std::sqrt(std::max(tr, 0.0));
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) /
                                     static_cast<double>(count - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

LinfResult linf_norm(const StateSpace& sys, double omega_lo, double omega_hi,
                     double points_per_decade) {
  if (!(omega_lo > 0.0) || !(omega_hi > omega_lo)) {
    throw ValidationError("linf_norm: need 0 < omega_lo < omega_hi");
  }
  if (!(points_per_decade > 0.0)) {
    throw ValidationError("linf_norm: grid density must be positive");
  }
  const FrequencyResponseEvaluator eval(sys);
  const double decades = std::log10(omega_hi / omega_lo);
  const auto count = static_cast<std::size_t>(
      std::max(2.0, std::ceil(decades * points_per_decade) + 1.0));
  const std::vector<double> grid = log_grid(omega_lo, omega_hi, count);
  const kernels::GridResponse resp = kernels::omp::response_grid(eval, grid);

  LinfResult out;
  std::size_t best = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!resp.ok[i]) {
      out.skipped.push_back(grid[i]);
      continue;
    }
    const double mag = std::abs(resp.values[i]);
    if (best == grid.size() || mag > out.value) {
      out.value = mag;
      best = i;
    }
  }
  if (best == grid.size()) return out;
  out.omega_peak = grid[best];

  // Golden-section refinement in log frequency over the neighbouring cells.
  auto mag_at = [&](double logw) {
    try {
      return std::abs(eval.evaluate(std::exp(logw)));
    } catch (const SingularAtFrequency&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  double a = std::log(grid[best == 0 ? 0 : best - 1]);
  double b = std::log(grid[std::min(best + 1, grid.size() - 1)]);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = mag_at(c);
  double fd = mag_at(d);
  for (int it = 0; it < 80 && (b - a) > 1e-14; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = mag_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = mag_at(d);
    }
  }
  const double wr = std::exp(0.5 * (a + b));
  const double fr = mag_at(std::log(wr));
  if (std::isfinite(fr) && fr > out.value) {
    out.value = fr;
    out.omega_peak = wr;
  }
  return out;
}

StateSpace series(const StateSpace& first, const StateSpace& second) {
  if (first.outputs() != second.inputs()) {
    throw DimensionMismatch("series: output/input count mismatch");
  }
  const Index n1 = first.states();
  const Index n2 = second.states();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = first.A();
  A.bottomLeftCorner(n2, n1) = second.B() * first.C();
  A.bottomRightCorner(n2, n2) = second.A();
  Matrix B(n1 + n2, first.inputs());
  B.topRows(n1) = first.B();
  B.bottomRows(n2) = second.B() * first.D();
  Matrix C(second.outputs(), n1 + n2);
  C.leftCols(n1) = second.D() * first.C();
  C.rightCols(n2) = second.C();
  return StateSpace(std::move(A), std::move(B), std::move(C),
                    second.D() * first.D());
}

StateSpace difference(const StateSpace& lhs, const StateSpace& rhs) {
  if (lhs.inputs() != rhs.inputs() || lhs.outputs() != rhs.outputs()) {
    throw DimensionMismatch("difference: io dimensions differ");
  }
  const Index n1 = lhs.states();
  const Index n2 = rhs.states();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = lhs.A();
  A.bottomRightCorner(n2, n2) = rhs.A();
  Matrix B(n1 + n2, lhs.inputs());
  B.topRows(n1) = lhs.B();
  B.bottomRows(n2) = rhs.B();
  Matrix C(lhs.outputs(), n1 + n2);
  C.leftCols(n1) = lhs.C();
  C.rightCols(n2) = -rhs.C();
  return StateSpace(std::move(A), std::move(B), std::move(C),
                    lhs.D() - rhs.D());
}

FrequencyResponseEvaluator::FrequencyResponseEvaluator(const StateSpace& sys) {
  if (!sys.is_siso()) {
    throw DimensionMismatch("FrequencyResponseEvaluator: not SISO");
  }
  d_ = sys.D()(0, 0);
  if (sys.states() == 0) return;
  Eigen::HessenbergDecomposition<Matrix> hess(sys.A());
  H_ = hess.matrixH();
  const Matrix Q = hess.matrixQ();
  b_ = Q.transpose() * sys.B().col(0);
  c_ = sys.C().row(0) * Q;
  scale_ = std::max(H_.cwiseAbs().maxCoeff(), 1.0);
}

Complex FrequencyResponseEvaluator::evaluate(double omega) const {
  const Index n = H_.rows();
  if (n == 0) return d_;
  // Gaussian elimination with adjacent-row pivoting on jwI - H.
  ComplexMatrix M = -H_.cast<Complex>();
  M.diagonal().array() += Complex(0.0, omega);
  ComplexVector rhs = b_.cast<Complex>();
  const double tiny =
      1e3 * std::numeric_limits<double>::epsilon() * (scale_ + std::abs(omega));
  for (Index k = 0; k + 1 < n; ++k) {
    if (std::abs(M(k + 1, k)) > std::abs(M(k, k))) {
      M.row(k).tail(n - k).swap(M.row(k + 1).tail(n - k));
      std::swap(rhs(k), rhs(k + 1));
    }
    if (std::abs(M(k, k)) <= tiny) {
      throw SingularAtFrequency(omega, "jwI - A is singular at omega = " +
                                           std::to_string(omega));
    }
    const Complex f = M(k + 1, k) / M(k, k);
    if (f != Complex(0.0)) {
      M.row(k + 1).tail(n - k) -= f * M.row(k).tail(n - k);
      rhs(k + 1) -= f * rhs(k);
    }
  }
  if (std::abs(M(n - 1, n - 1)) <= tiny) {
    throw SingularAtFrequency(omega, "jwI - A is singular at omega = " +
                                         std::to_string(omega));
  }
  for (Index k = n - 1; k >= 0; --k) {
    Complex s = rhs(k);
    for (Index j = k + 1; j < n; ++j) s -= M(k, j) * rhs(j);
    rhs(k) = s / M(k, k);
  }
  Complex y = d_;
  for (Index k = 0; k < n; ++k) y += c_(k) * rhs(k);
  return y;
}

}  // namespace barysid
