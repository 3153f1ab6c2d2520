#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <numbers>

#include "barysid/errors.hpp"
#include "barysid/weight_opt.hpp"
#include "helpers.hpp"

using namespace barysid;
using testutil::random_matrix;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double min_eig(const Matrix& m) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

// Ackermann pole placement for A - b w.
RowVector place(const Matrix& A, const Vector& b, const std::vector<Complex>& poles) {
  const Index n = A.rows();
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n + 1);
  c(0) = 1.0;
  for (const Complex& p : poles) {
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(n + 1);
    for (Index i = 0; i < n; ++i) {
      next(i + 1) += c(i);
      next(i) -= p * c(i);
    }
    c = next;
  }
  Matrix pA = Matrix::Zero(n, n);
  Matrix Ak = Matrix::Identity(n, n);
  for (Index i = 0; i <= n; ++i) {
    pA += c(i).real() * Ak;
    Ak = Ak * A;
  }
  Matrix ctrb(n, n);
  Vector v = b;
  for (Index i = 0; i < n; ++i) {
    ctrb.col(i) = v;
    v = A * v;
  }
  RowVector en = RowVector::Zero(n);
  en(n - 1) = 1.0;
  return en * ctrb.inverse() * pA;
}

struct SelfId {
  InterpolationData data;
  BasisPair bases;
  RowVector W0;
  InterpolantModel model;
  std::vector<ExperimentRecord> records;
};

// A plant that is itself a stable interpolant, interrogated at DC and a few
// frequencies.
SelfId self_identification() {
  SelfId s;
  s.data.D = 0.0;
  s.data.K = 1.5;
  s.data.points = {{kTwoPi * 0.8, Complex(0.9, -1.1)}, {kTwoPi * 3.0, Complex(-0.4, -0.3)}};
  s.bases = build_bases(s.data);
  s.W0 = place(s.bases.A_cal, s.bases.B_M,
               {{-1.2, 0}, {-0.8, 4.0}, {-0.8, -4.0}, {-1.5, 19.0}, {-1.5, -19.0}});
  s.model = assemble_model(s.bases, s.data, s.W0);
  ExperimentConfig cfg;
  cfg.gamma = 1e-4;
  s.records.push_back(estimate_dc_and_feedthrough(s.model.R, cfg, kTwoPi * 0.5).record);
  for (double f : {0.5, 0.8, 1.7, 3.0, 6.0}) s.records.push_back(run_experiment(s.model.R, kTwoPi * f, cfg));
  return s;
}

CovariancePartition random_partition(std::mt19937_64& rng, Index n) {
  Matrix G = random_matrix(rng, n + 1, 3 * (n + 1));
  return CovariancePartition::from_matrix(G * G.transpose() / double(3 * (n + 1)));
}

}  // namespace

TEST_CASE("drive_bases examples") {
  InterpolationData d;
  d.K = 2.0;
  auto b = build_bases(d);
  const double fs = 50.0;
  auto x0 = drive_bases(b, SampledSignal(fs, Vector::Zero(20)), SampledSignal(fs, Vector::Zero(20)));
  CHECK(x0.samples.cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(1);
  Vector u = random_matrix(rng, 30, 1), y = random_matrix(rng, 30, 1);
  SampledSignal us(fs, u), ys(fs, y);
  auto xz = drive_bases(b, us, ys, Hold::Zoh);
  auto xf = drive_bases(b, us, ys, Hold::Foh);
  REQUIRE(xz.channels() == 2);
  double sz = 0.0, sf = 0.0;
  for (Index i = 0; i < 30; ++i) {
    CHECK(xz.samples(0, i) == doctest::Approx(-y(i)));
    CHECK(std::abs(xz.samples(1, i) - sz) < 1e-12);
    CHECK(std::abs(xf.samples(1, i) - sf) < 1e-12);
    sz += (d.K * u(i) - y(i)) / fs;
    if (i + 1 < 30) sf += 0.5 * ((d.K * u(i) - y(i)) + (d.K * u(i + 1) - y(i + 1))) / fs;
  }
}

TEST_CASE("drive_bases rejects mismatched signals") {
  InterpolationData d;
  auto b = build_bases(d);
  CHECK_THROWS_AS(drive_bases(b, SampledSignal(10, Vector::Zero(3)), SampledSignal(10, Vector::Zero(4))),
                  DimensionMismatch);
}

TEST_CASE("M-weighted error of the plant's own interpolant vanishes") {
  auto s = self_identification();
  RowVector Wf(s.W0.size() + 1);
  Wf << 1.0, s.W0;
  double ef = 0.0, ez = 0.0, ymax = 0.0;
  for (const auto& r : s.records) {
    auto xf = drive_bases(s.bases, r.full_u(), r.full_y(), Hold::Foh);
    auto xz = drive_bases(s.bases, r.full_u(), r.full_y(), Hold::Zoh);
    ef = std::max(ef, (Wf * xf.samples).cwiseAbs().maxCoeff());
    ez = std::max(ez, (Wf * xz.samples).cwiseAbs().maxCoeff());
    ymax = std::max(ymax, r.full_y().samples.cwiseAbs().maxCoeff());
  }
  CHECK(ef < 1e-4 * ymax);
  CHECK(ef < 0.1 * ez);
}

TEST_CASE("BasisDriver matches whole-system simulation for both holds") {
  std::mt19937_64 rng(2);
  InterpolationData d;
  d.D = 0.3;
  d.K = -1.2;
  d.points = {{2.0, Complex(1, 2)}, {9.0, Complex(-0.5, 0.1)}, {40.0, Complex(0.2, -0.7)}};
  auto b = build_bases(d);
  Vector u = random_matrix(rng, 700, 1), y = random_matrix(rng, 700, 1);
  for (Hold h : {Hold::Zoh, Hold::Foh}) {
    auto ref = drive_bases(b, SampledSignal(200.0, u), SampledSignal(200.0, y), h);
    BasisDriver drv(b, d.D, 200.0, h);
    Matrix got(drv.channels(), 0);
    drv.stream(u, y, 64, [&](const Matrix& blk) {
      Matrix next(got.rows(), got.cols() + blk.cols());
      next << got, blk;
      got = next;
    });
    REQUIRE(got.cols() == 700);
    CHECK((got - ref.samples).cwiseAbs().maxCoeff() < 1e-10 * ref.samples.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("covariance examples") {
  Vector v(3);
  v << 1.0, -2.0, 0.5;
  MultiSignal s{10.0, v.replicate(1, 17)};
  auto c = covariance(std::span<const MultiSignal>(&s, 1));
  CHECK((c.X - v * v.transpose()).norm() < 1e-14);
  CHECK(c.X1_hat == 1.0);
  CHECK(c.X0_hat.size() == 2);
  CHECK(c.X2_hat.rows() == 2);

  std::vector<MultiSignal> two{s, s};
  auto c2 = covariance(two);
  CHECK((c2.X - 2.0 * v * v.transpose()).norm() < 1e-14);
}

TEST_CASE("covariance matches naive accumulation, is PSD and scales by c^2") {
  std::mt19937_64 rng(3);
  std::vector<MultiSignal> sig;
  for (Index len : {13, 200, 57, 1500}) sig.push_back({100.0, random_matrix(rng, 6, len)});
  auto c = covariance(sig);
  Matrix naive = Matrix::Zero(6, 6);
  for (const auto& s : sig) {
    Matrix acc = Matrix::Zero(6, 6);
    for (Index i = 0; i < s.size(); ++i)
      for (Index a = 0; a < 6; ++a)
        for (Index b = 0; b < 6; ++b) acc(a, b) += s.samples(a, i) * s.samples(b, i);
    naive += acc / double(s.size());
  }
  CHECK((c.X - naive).cwiseAbs().maxCoeff() < 1e-12 * naive.cwiseAbs().maxCoeff());
  CHECK(min_eig(c.X) > -1e-10);
  CHECK((c.X - c.X.transpose()).norm() == 0.0);

  std::vector<MultiSignal> scaled = sig;
  for (auto& s : scaled) s.samples *= 3.0;
  auto c3 = covariance(scaled);
  CHECK((c3.X - 9.0 * c.X).cwiseAbs().maxCoeff() < 1e-12 * c3.X.cwiseAbs().maxCoeff());
}

TEST_CASE("covariance_from_records equals covariance of driven transients") {
  auto s = self_identification();
  std::vector<MultiSignal> sig;
  for (const auto& r : s.records)
    if (r.u_transient.size() > 0) sig.push_back(drive_bases(s.bases, r));
  auto ref = covariance(sig);
  for (bool par : {false, true}) {
    CovarianceOptions opt;
    opt.parallel = par;
    auto c = covariance_from_records(s.bases, s.data.D, s.records, opt);
    CHECK((c.X - ref.X).cwiseAbs().maxCoeff() < 1e-9 * ref.X.cwiseAbs().maxCoeff());
  }
  CovarianceOptions full;
  full.include_steady_state = true;
  auto cf = covariance_from_records(s.bases, s.data.D, s.records, full);
  CHECK((cf.X - ref.X).norm() > 0.0);
}

TEST_CASE("solve_explicit examples") {
  std::mt19937_64 rng(4);
  auto c = random_partition(rng, 5);
  c.X0_hat.setZero();
  CHECK(solve_explicit(c).cwiseAbs().maxCoeff() == 0.0);

  Matrix X(2, 2);
  X << 1, 2, 2, 4;
  auto s = CovariancePartition::from_matrix(X);
  CHECK(solve_explicit(s)(0) == doctest::Approx(-0.5));

  auto r = random_partition(rng, 5);
  RowVector W = solve_explicit(r);
  Vector stat = r.X0_hat.transpose() + r.X2_hat * W.transpose();
  CHECK(stat.norm() <= 1e-8 * r.X0_hat.norm());
  const double best = problem1_cost(r, W);
  std::normal_distribution<double> nd;
  int worse = 0;
  for (int i = 0; i < 1000; ++i) {
    RowVector d = random_matrix(rng, 1, 5);
    d *= 1e-3 / d.norm();
    if (problem1_cost(r, W + d) >= best) ++worse;
  }
  CHECK(worse == 1000);
}

TEST_CASE("solve_explicit beats random perturbations") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    auto r = random_partition(rng, 4);
    RowVector W = solve_explicit(r);
    const double best = problem1_cost(r, W);
    for (int i = 0; i < 10000; ++i) {
      RowVector d = random_matrix(rng, 1, 4);
      CHECK_FALSE(problem1_cost(r, W + 0.1 * d) < best);
    }
  }
}

TEST_CASE("solve_explicit on a rank-deficient covariance") {
  Matrix X = Matrix::Zero(3, 3);
  X(0, 0) = 1.0;
  X(1, 1) = 1.0;
  auto c = CovariancePartition::from_matrix(X);
  CHECK_THROWS_AS(solve_explicit(c), SingularCovariance);
  Matrix Y = Matrix::Ones(3, 3);
  auto cy = CovariancePartition::from_matrix(Y);
  CHECK_THROWS_AS(solve_explicit(cy), SingularCovariance);
  ExplicitOptions ridge;
  ridge.ridge = true;
  CHECK(solve_explicit(cy, ridge).allFinite());
}

TEST_CASE("solve_stable on a self-identification problem") {
  auto s = self_identification();
  auto cov = covariance_from_records(s.bases, s.data.D, s.records);
  RowVector We = solve_explicit(cov);
  CHECK((We - s.W0).norm() < 1e-3 * s.W0.norm());

  const double alpha = 0.05;
  auto st = solve_stable(cov, s.bases, alpha);
  const double ce = problem1_cost(cov, We);
  const double cs = problem1_cost(cov, st.W_hat);
  CHECK((st.W_hat - We).norm() < 1e-3 * We.norm());
  CHECK(std::abs(cs - ce) <= 1e-4 * std::abs(ce));
  CHECK(spectral_abscissa(Matrix(s.bases.A_cal - s.bases.B_M * st.W_hat)) < -alpha + 1e-6);
  CHECK(cs <= st.cost_bound + 1e-6);
  CHECK(cs >= ce);
}

TEST_CASE("solve_stable guarantees on a plant it cannot represent") {
  PlantSpec spec;
  spec.n_modes = 4;
  spec.seed = 5;
  auto g = synth_plant(spec);
  ExperimentConfig cfg;
  auto dc = estimate_dc_and_feedthrough(g, cfg, kTwoPi * 0.5);
  InterpolationData d;
  d.D = dc.D;
  d.K = dc.K;
  std::vector<ExperimentRecord> recs{dc.record};
  for (double f : {0.5, 3.0, 20.0, 90.0}) {
    recs.push_back(run_experiment(g, kTwoPi * f, cfg));
    d.points.push_back(recs.back().response);
  }
  for (double f : {1.2, 8.0, 45.0}) recs.push_back(run_experiment(g, kTwoPi * f, cfg));
  auto b = build_bases(d);
  auto cov = covariance_from_records(b, d.D, recs);
  const double alpha = 1e-4 * kTwoPi * 90.0;
  auto st = solve_stable(cov, b, alpha);

  CHECK(st.P.rows() == b.state_dim());
  CHECK(min_eig(st.P) > 0.0);
  CHECK(spectral_abscissa(Matrix(b.A_cal - b.B_M * st.W_hat)) < -alpha + 1e-6);
  const double cs = problem1_cost(cov, st.W_hat);
  const double ce = problem1_cost(cov, solve_explicit(cov));
  CHECK(cs <= st.cost_bound + 1e-6);
  CHECK(cs >= ce);
  const Matrix X2inv = cov.X2_hat.inverse();
  CHECK(st.cost_bound ==
        doctest::Approx(st.gamma - (cov.X0_hat * X2inv * cov.X0_hat.transpose())(0, 0) + cov.X1_hat)
            .epsilon(1e-9));
  const Matrix Pinv = st.P.inverse();
  const double lhs = (st.Q * (2.0 * st.P - cov.X2_hat).inverse() * st.Q.transpose())(0, 0);
  const double rhs = (st.Q * Pinv * cov.X2_hat * Pinv * st.Q.transpose())(0, 0);
  CHECK(lhs >= rhs - 1e-9);
  CHECK(lhs <= st.gamma + 1e-9);
}

TEST_CASE("solve_stable input validation") {
  InterpolationData d;
  auto b = build_bases(d);
  Matrix X(2, 2);
  X << 1, 0.5, 0.5, 1;
  auto c = CovariancePartition::from_matrix(X);
  CHECK_THROWS_AS(solve_stable(c, b, 0.0), ValidationError);
  InterpolationData d1;
  d1.points = {{1.0, 1.0}};
  CHECK_THROWS_AS(solve_stable(c, build_bases(d1), 0.1), DimensionMismatch);
}
