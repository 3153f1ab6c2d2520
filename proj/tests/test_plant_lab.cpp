#include "doctest.h"

#include <numbers>

#include "barysid/errors.hpp"
#include "barysid/plant_lab.hpp"
#include "helpers.hpp"

using namespace barysid;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

StateSpace one_mode(double fn, double zeta, double gain = 1.0) {
  const double wn = kTwoPi * fn;
  Matrix A(2, 2);
  A << 0.0, 1.0, -wn * wn, -2.0 * zeta * wn;
  Matrix B(2, 1);
  B << 0.0, gain * wn * wn;
  Matrix C(1, 2);
  C << 1.0, 0.0;
  return StateSpace(A, B, C, Matrix::Zero(1, 1));
}

StateSpace lag(double a, double gain) {
  return StateSpace(Matrix::Constant(1, 1, -a), Matrix::Constant(1, 1, gain),
                    Matrix::Ones(1, 1), Matrix::Zero(1, 1));
}

}  // namespace

TEST_CASE("synth_plant examples") {
  PlantSpec spec;
  spec.seed = 42;
  CHECK(synth_plant(spec) == synth_plant(spec));
  CHECK(synth_plant(spec).states() == 40);
  CHECK(spectral_abscissa(synth_plant(spec)) < 0.0);
  CHECK(synth_plant(spec).D()(0, 0) == 0.0);

  PlantSpec one;
  one.n_modes = 1;
  one.zeta_lo = one.zeta_hi = 0.01;
  one.f_lo = 10.0 * (1 - 1e-15);
  one.f_hi = 10.0 * (1 + 1e-15);
  auto g = synth_plant(one);
  CHECK(std::abs(spectral_abscissa(g) + 0.2 * std::numbers::pi) < 1e-9);

  PlantSpec other = spec;
  other.seed = 43;
  CHECK_FALSE(synth_plant(spec) == synth_plant(other));

  for (std::uint64_t s = 1; s < 20; ++s) {
    PlantSpec p;
    p.seed = s;
    p.zeta_lo = 1e-4;
    CHECK(spectral_abscissa(synth_plant(p)) < 0.0);
  }
}

TEST_CASE("plant spec validation") {
  PlantSpec bad;
  bad.zeta_hi = 1.0;
  CHECK_THROWS_AS(synth_plant(bad), ValidationError);
  bad = PlantSpec{};
  bad.n_modes = 0;
  CHECK_THROWS_AS(synth_plant(bad), ValidationError);
}

TEST_CASE("detect_steady_state examples") {
  const double fs = 100.0, w = kTwoPi * 5.0;
  const Index L = 80;
  Vector y(L);
  for (Index i = 0; i < L; ++i) y(i) = 3.0 * std::cos(w * (i + 40) / fs) - 4.0 * std::sin(w * (i + 40) / fs);
  auto fit = detect_steady_state(SampledSignal(fs, y), w, 40, 1e-3);
  CHECK(fit.x1 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.x2 == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(fit.gamma_hat < 1e-12);
  CHECK(fit.pass);

  auto zero = detect_steady_state(SampledSignal(fs, Vector::Zero(L)), w, 0, 1e-3);
  CHECK(zero.degenerate);
  CHECK(zero.pass);
  CHECK(zero.gamma_hat == 0.0);
  CHECK(zero.x1 == 0.0);
  CHECK(zero.x2 == 0.0);
}

TEST_CASE("detect_steady_state crossing follows the exponential decay") {
  // y_i = cos(w i/fs) + exp(-i/fs)
  const double fs = 100.0, w = kTwoPi * 5.0, gamma = 0.01;
  const Index L = 80;
  Index first = -1;
  for (Index n = 0; n < 2000; n += L) {
    Vector y(L);
    for (Index i = 0; i < L; ++i) {
      const double t = double(n + i) / fs;
      y(i) = std::cos(w * t) + std::exp(-t);
    }
    auto fit = detect_steady_state(SampledSignal(fs, y), w, n, gamma);
    if (n == 0) CHECK(fit.gamma_hat > gamma);
    if (fit.pass) {
      first = n;
      break;
    }
  }
  REQUIRE(first >= 0);
  // residual max is the decaying term over the block, between half and all
  // of e^{-n/fs}; detection lands in the block where that drops below gamma
  const double lo = fs * std::log(0.3 / gamma) - L;
  const double hi = fs * std::log(1.0 / gamma) + L;
  CHECK(double(first) >= lo);
  CHECK(double(first) <= hi);
}

TEST_CASE("run_experiment examples") {
  ExperimentConfig cfg;
  cfg.fs = 1000.0;

  auto st = run_experiment(StateSpace::static_gain(2.0), 5.0, cfg);
  CHECK(st.detected_at == 0);
  CHECK(std::abs(st.response.value - Complex(2.0, 0.0)) < 1e-12);

  ExperimentConfig tight = cfg;
  tight.gamma = 1e-4;
  auto r = run_experiment(lag(1.0, 1.0), 1.0, tight);
  CHECK(testutil::rel(r.response.value, Complex(0.5, -0.5)) < 1e-3);

  const double zeta = 1e-3, fn = 5.0, wn = kTwoPi * fn;
  // At resonance the transient shares the drive frequency and each chunk fit
  // absorbs most of it; gamma = 1e-3 passes after about 80 s here, before
  // the 3 / (zeta wn) = 95 s bound.
  ExperimentConfig slow = cfg;
  slow.gamma = 1e-4;
  slow.max_duration = 4000.0;
  auto res = run_experiment(one_mode(fn, zeta), wn, slow);
  CHECK(double(res.detected_at) > 3.0 / (zeta * wn) * cfg.fs);
}

TEST_CASE("run_experiment amplitude scaling") {
  ExperimentConfig cfg;
  cfg.amplitude = 2.5;
  cfg.gamma = 1e-4;
  auto r = run_experiment(lag(2.0, 3.0), 2.0, cfg);
  CHECK(testutil::rel(r.response.value, freq_response_siso(lag(2.0, 3.0), 2.0)) < 1e-3);
}

TEST_CASE("run_experiment timeout and validation") {
  ExperimentConfig cfg;
  cfg.max_duration = 2.0;
  CHECK_THROWS_AS(run_experiment(one_mode(1.0, 1e-4), kTwoPi, cfg), SteadyStateTimeout);
  CHECK_THROWS_AS(run_experiment(lag(1.0, 1.0), kTwoPi * 200.0, cfg), ValidationError);
  ExperimentConfig bad;
  bad.gamma = 0.0;
  CHECK_THROWS_AS(run_experiment(lag(1.0, 1.0), 1.0, bad), ValidationError);
}

TEST_CASE("estimate_dc_and_feedthrough examples") {
  ExperimentConfig cfg;
  auto dc = estimate_dc_and_feedthrough(lag(1.0, 2.0), cfg, 1.0);
  CHECK(std::abs(dc.K - 2.0) < 1e-3);
  CHECK(dc.D == 0.0);

  auto st = estimate_dc_and_feedthrough(StateSpace::static_gain(3.0), cfg, 1.0);
  CHECK(st.K == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(st.D == 3.0);

  PlantSpec spec;
  spec.n_modes = 6;
  auto g = synth_plant(spec);
  auto est = estimate_dc_and_feedthrough(g, cfg, kTwoPi * 0.5);
  const double k = freq_response_siso(g, 0.0).real();
  CHECK(std::abs(est.K - k) <= 10.0 * cfg.gamma * std::abs(k));
  CHECK(est.D == 0.0);
}

TEST_CASE("measured response error stays within 10 gamma |G|") {
  PlantSpec spec;
  spec.n_modes = 4;
  spec.seed = 3;
  auto g = synth_plant(spec);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> lf(std::log(0.5), std::log(90.0));
  for (double gamma : {1e-2, 1e-3, 1e-4}) {
    ExperimentConfig cfg;
    cfg.gamma = gamma;
    for (int i = 0; i < 5; ++i) {
      const double w = kTwoPi * std::exp(lf(rng));
      auto r = run_experiment(g, w, cfg);
      const Complex truth = freq_response_siso(g, w);
      CHECK(std::abs(r.response.value - truth) <= 10.0 * gamma * std::abs(truth));
    }
  }
}

TEST_CASE("detected_at is non-increasing in gamma") {
  PlantSpec spec;
  spec.n_modes = 3;
  auto g = synth_plant(spec);
  for (double f : {0.7, 4.0, 30.0}) {
    Index prev = std::numeric_limits<Index>::max();
    for (double gamma : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) {
      ExperimentConfig cfg;
      cfg.gamma = gamma;
      auto r = run_experiment(g, kTwoPi * f, cfg);
      CHECK(r.detected_at <= prev);
      prev = r.detected_at;
    }
  }
}

TEST_CASE("transient and steady segments reconstruct the simulated record") {
  auto g = one_mode(3.0, 0.02);
  ExperimentConfig loose;
  loose.gamma = 1e-2;
  ExperimentConfig tight = loose;
  tight.gamma = 1e-5;
  const double w = kTwoPi * 2.0;
  auto a = run_experiment(g, w, loose);
  auto b = run_experiment(g, w, tight);
  CHECK(a.u_transient.size() == a.detected_at);
  CHECK(a.y_transient.size() == a.detected_at);
  CHECK(a.y_steady.size() == a.chunk_length);
  REQUIRE(b.detected_at > a.detected_at);
  auto ya = a.full_y();
  auto yb = b.full_y();
  CHECK((ya.samples - yb.samples.head(ya.size())).cwiseAbs().maxCoeff() == 0.0);
  auto ua = a.full_u();
  double worst = 0.0;
  for (Index i = 0; i < ua.size(); ++i)
    worst = std::max(worst, std::abs(ua.samples(i) - std::cos(w * i / loose.fs)));
  CHECK(worst < 1e-12);
}
