#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <numbers>

#include "barysid/errors.hpp"
#include "barysid/lti.hpp"
#include "helpers.hpp"

using namespace barysid;
using testutil::random_matrix;
using testutil::random_stable;

namespace {

StateSpace first_order(double a, double gain = 1.0) {
  return StateSpace(Matrix::Constant(1, 1, -a), Matrix::Constant(1, 1, gain),
                    Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1));
}

// Real 2n x 2n embedding of (jwI - A) x = B, solved by full-pivot LU.
Complex oracle_response(const StateSpace& s, double w) {
  const Index n = s.states();
  Matrix M = Matrix::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = -s.A();
  M.bottomRightCorner(n, n) = -s.A();
  M.topRightCorner(n, n) = -w * Matrix::Identity(n, n);
  M.bottomLeftCorner(n, n) = w * Matrix::Identity(n, n);
  Vector rhs = Vector::Zero(2 * n);
  rhs.head(n) = s.B().col(0);
  Vector x = M.fullPivLu().solve(rhs);
  Complex y(s.D()(0, 0), 0.0);
  for (Index i = 0; i < n; ++i) y += s.C()(0, i) * Complex(x(i), x(n + i));
  return y;
}

// (1/pi) int_0^inf |G|^2 dw with w = tan(theta), composite Simpson.
double h2_quadrature(const StateSpace& s) {
  const int m = 200000;
  const double h = (std::numbers::pi / 2) / m;
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    double th = i * h;
    double f;
    if (i == m) {
      double cb = (s.C() * s.B())(0, 0);
      f = cb * cb;
    } else {
      double w = std::tan(th), sec = 1.0 / std::cos(th);
      f = std::norm(freq_response_siso(s, w)) * sec * sec;
    }
    acc += f * (i == 0 || i == m ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return acc * h / 3.0 / std::numbers::pi;
}

// Faddeev-LeVerrier characteristic polynomial, roots from the companion matrix.
std::vector<Complex> charpoly_roots(const Matrix& A) {
  const Index n = A.rows();
  std::vector<double> c(n + 1);
  c[n] = 1.0;
  Matrix M = Matrix::Zero(n, n);
  for (Index k = 1; k <= n; ++k) {
    M = A * M + c[n - k + 1] * Matrix::Identity(n, n);
    c[n - k] = -(A * M).trace() / double(k);
  }
  Matrix comp = Matrix::Zero(n, n);
  for (Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (Index i = 0; i < n; ++i) comp(i, n - 1) = -c[i];
  Eigen::EigenSolver<Matrix> es(comp, false);
  std::vector<Complex> r;
  for (Index i = 0; i < n; ++i) r.push_back(es.eigenvalues()(i));
  return r;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

}  // namespace

TEST_CASE("freq_response examples") {
  auto g = first_order(1.0);
  CHECK(std::abs(freq_response_siso(g, 0.0) - Complex(1, 0)) < 1e-15);
  CHECK(std::abs(freq_response_siso(g, 1.0) - Complex(0.5, -0.5)) < 1e-15);

  std::mt19937_64 rng(11);
  StateSpace s(random_matrix(rng, 4, 4), random_matrix(rng, 4, 1),
               random_matrix(rng, 1, 4), random_matrix(rng, 1, 1));
  CHECK(testutil::rel(freq_response_siso(s, 2.0), oracle_response(s, 2.0)) < 1e-12);

  FrequencyResponseEvaluator ev(s);
  for (double w : {0.1, 2.0, 37.0})
    CHECK(testutil::rel(ev.evaluate(w), oracle_response(s, w)) < 1e-11);
}

TEST_CASE("freq_response at an undamped pole throws") {
  Matrix A(2, 2);
  A << 0, 3, -3, 0;
  StateSpace s(A, Matrix::Constant(2, 1, 1.0), Matrix::Constant(1, 2, 1.0), Matrix::Zero(1, 1));
  CHECK_THROWS_AS(freq_response_siso(s, 3.0), SingularAtFrequency);
  CHECK_THROWS_AS(FrequencyResponseEvaluator(s).evaluate(3.0), SingularAtFrequency);
}

TEST_CASE("StateSpace rejects bad dimensions and non-finite entries") {
  CHECK_THROWS_AS(StateSpace(Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Zero(1, 2),
                             Matrix::Zero(1, 1)),
                  DimensionMismatch);
  Matrix A = Matrix::Zero(1, 1);
  A(0, 0) = std::nan("");
  CHECK_THROWS(StateSpace(A, Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1)));
}

TEST_CASE("simulate_zoh examples") {
  const double fs = 100.0;
  SampledSignal one(fs, Vector::Ones(50));
  auto y = simulate_zoh(StateSpace::static_gain(2.0), one);
  CHECK((y.samples.array() - 2.0).abs().maxCoeff() == 0.0);

  const double a = 3.0;
  auto lag = StateSpace(Matrix::Constant(1, 1, -a), Matrix::Constant(1, 1, a),
                        Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1));
  auto step = simulate_zoh(lag, SampledSignal(fs, Vector::Ones(400)));
  double worst = 0.0;
  for (Index n = 0; n < 400; ++n)
    worst = std::max(worst, std::abs(step.samples(n) - (1.0 - std::exp(-a * n / fs))));
  CHECK(worst < 1e-10);

  auto zero = simulate_zoh(lag, SampledSignal(fs, Vector::Zero(100)));
  CHECK(zero.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate_zoh sinusoid reaches |G| and arg G") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    auto s = random_stable(rng, 4, 2.0);
    const double fs = 2000.0, w = 3.0, amp = 1.5;
    // ten time constants with the slowest pole at -2 or further left
    const Index n = static_cast<Index>(12.0 / 2.0 * fs * 2);
    Vector u(n);
    for (Index i = 0; i < n; ++i) u(i) = amp * std::cos(w * i / fs);
    auto y = simulate_zoh(s, SampledSignal(fs, u));
    // ZOH response to the sampled cosine: the discrete-time transfer function
    auto d = discretize_zoh(s, 1.0 / fs);
    const Complex z = std::exp(Complex(0, w / fs));
    Matrix Id = Matrix::Identity(4, 4);
    ComplexMatrix Mz = z * Id.cast<Complex>() - d.Ad.cast<Complex>();
    Complex gd = (d.C.cast<Complex>() * Mz.partialPivLu().solve(d.Bd.cast<Complex>()))(0, 0) +
                 d.D(0, 0);
    double worst = 0.0;
    for (Index i = n - 200; i < n; ++i) {
      double expect = amp * std::abs(gd) * std::cos(w * i / fs + std::arg(gd));
      worst = std::max(worst, std::abs(y.samples(i) - expect));
    }
    CHECK(worst <= 1e-6 * amp * std::abs(gd));
    // and the discrete response is the continuous one up to the hold's O(dt) lag
    CHECK(std::abs(gd - freq_response_siso(s, w)) < 5.0 * w / fs * std::abs(gd) + 1e-6);
  }
}

TEST_CASE("foh is exact for piecewise-linear input") {
  // integrator driven by a ramp: y(t) = t^2 / 2
  StateSpace integ(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  const double fs = 10.0;
  MultiSignal u{fs, Matrix(1, 30)};
  for (Index i = 0; i < 30; ++i) u.samples(0, i) = i / fs;
  auto y = simulate_foh(integ, u);
  for (Index i = 0; i < 30; ++i) CHECK(y.samples(0, i) == doctest::Approx(0.5 * (i / fs) * (i / fs)).epsilon(1e-12));

  // constant input: foh and zoh coincide
  std::mt19937_64 rng(2);
  auto s = random_stable(rng, 3);
  MultiSignal c{fs, Matrix::Ones(1, 40)};
  auto yf = simulate_foh(s, c);
  auto yz = simulate_zoh(s, c);
  CHECK((yf.samples - yz.samples).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("expm of a rotation block is exact cos/sin") {
  Matrix M(2, 2);
  M << 0, 0.7, -0.7, 0;
  Matrix E = expm(M);
  CHECK(E(0, 0) == doctest::Approx(std::cos(0.7)).epsilon(1e-15));
  CHECK(E(0, 1) == doctest::Approx(std::sin(0.7)).epsilon(1e-15));
  CHECK(E(1, 0) == doctest::Approx(-std::sin(0.7)).epsilon(1e-15));
  Matrix big = 40.0 * M;
  Matrix Eb = expm(big);
  CHECK(Eb(0, 0) == doctest::Approx(std::cos(28.0)).epsilon(1e-12));
}

TEST_CASE("h2_norm examples") {
  CHECK(h2_norm(first_order(0.5)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h2_norm(first_order(2.0)) == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    auto s = random_stable(rng, 6, 0.5);
    double h = h2_norm(s);
    CHECK(std::abs(h * h - h2_quadrature(s)) <= 1e-4 * h * h);
  }
}

TEST_CASE("h2_norm errors") {
  CHECK_THROWS_AS(h2_norm(first_order(-0.1)), UnstableSystem);
  StateSpace withd(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                   Matrix::Constant(1, 1, 0.3));
  CHECK_THROWS_AS(h2_norm(withd), NonzeroFeedthrough);
}

TEST_CASE("lyapunov solve matches the Kronecker vectorization") {
  std::mt19937_64 rng(8);
  for (Index n : {3, 7, 12}) {
    auto s = random_stable(rng, n);
    Matrix Q = s.B() * s.B().transpose() + 0.1 * Matrix::Identity(n, n);
    Matrix P = solve_lyapunov(s.A(), Q);
    Matrix I = Matrix::Identity(n, n);
    Matrix K = kron(I, s.A()) + kron(s.A(), I);
    Vector vecQ = Eigen::Map<const Vector>(Q.data(), n * n);
    Vector vecP = K.fullPivLu().solve(-vecQ);
    Matrix Po = Eigen::Map<const Matrix>(vecP.data(), n, n);
    CHECK((P - Po).norm() <= 1e-10 * Po.norm());
  }
}

TEST_CASE("linf_norm examples") {
  auto r = linf_norm(first_order(1.0), 1e-3, 1e3);
  CHECK(std::abs(r.value - 1.0) < 1e-6);

  const double zeta = 0.01, wn = 10.0;
  Matrix A(2, 2);
  A << 0, 1, -wn * wn, -2 * zeta * wn;
  StateSpace res(A, Matrix((Matrix(2, 1) << 0, wn * wn).finished()),
                 Matrix((Matrix(1, 2) << 1, 0).finished()), Matrix::Zero(1, 1));
  const double peak = 1.0 / (2 * zeta * std::sqrt(1 - zeta * zeta));
  auto p = linf_norm(res, 1e-1, 1e3);
  CHECK(std::abs(p.value - peak) <= 1e-3 * peak);
  CHECK(p.value == doctest::Approx(50.0025).epsilon(1e-3));

  CHECK(linf_norm(StateSpace::static_gain(3.0), 1.0, 10.0).value == doctest::Approx(3.0));
}

TEST_CASE("linf_norm works on unstable systems and skips undamped poles") {
  CHECK(linf_norm(first_order(-1.0), 1e-3, 1e3).value == doctest::Approx(1.0).epsilon(1e-6));
  Matrix A(2, 2);
  A << 0, 2, -2, 0;
  StateSpace rot(A, Matrix::Constant(2, 1, 1.0), Matrix::Constant(1, 2, 1.0), Matrix::Zero(1, 1));
  auto r = linf_norm(rot, 1.0, 4.0, 2000.0);
  CHECK(std::isfinite(r.value));
}

TEST_CASE("spectral_abscissa examples") {
  Matrix d = Eigen::Vector2d(-1, -3).asDiagonal();
  CHECK(spectral_abscissa(d) == -1.0);
  Matrix rot(2, 2);
  rot << 0, 5, -5, 0;
  CHECK(std::abs(spectral_abscissa(rot)) < 1e-15);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix A = random_matrix(rng, 8, 8) / std::sqrt(8.0);
    double oracle = -1e300;
    for (auto r : charpoly_roots(A)) oracle = std::max(oracle, r.real());
    CHECK(std::abs(spectral_abscissa(A) - oracle) < 1e-8);
  }
}

TEST_CASE("series response is the product of responses") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = random_stable(rng, 3, 0.5, 0.3);
    auto b = random_stable(rng, 4, 0.5, -0.2);
    auto s = series(a, b);
    for (double w : {0.0, 0.3, 2.0, 11.0})
      CHECK(testutil::rel(freq_response_siso(s, w),
                          freq_response_siso(a, w) * freq_response_siso(b, w)) < 1e-10);
  }
}

TEST_CASE("difference response") {
  std::mt19937_64 rng(10);
  auto a = random_stable(rng, 3);
  auto b = random_stable(rng, 2);
  auto d = difference(a, b);
  CHECK(testutil::rel(freq_response_siso(d, 1.3),
                      freq_response_siso(a, 1.3) - freq_response_siso(b, 1.3)) < 1e-12);
}

TEST_CASE("spectral_abscissa is invariant under orthogonal similarity") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix A = random_matrix(rng, 6, 6);
    Matrix T = random_matrix(rng, 6, 6).householderQr().householderQ();
    CHECK(std::abs(spectral_abscissa(T * A * T.transpose()) - spectral_abscissa(A)) < 1e-8);
  }
}
