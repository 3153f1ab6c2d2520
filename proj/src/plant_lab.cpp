#include "barysid/plant_lab.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "barysid/errors.hpp"

namespace barysid {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Uniform double in [0, 1) from the top 53 bits, so the stream is identical
// across standard library implementations.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Matrix matrix_power(Matrix base, Index exponent) {
  Matrix result = Matrix::Identity(base.rows(), base.cols());
  while (exponent > 0) {
    if (exponent & 1) result = result * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result;
}

SampledSignal concat(const SampledSignal& a, const SampledSignal& b) {
  Vector v(a.size() + b.size());
  v << a.samples, b.samples;
  return SampledSignal(a.fs, std::move(v));
}

// Plant driven by an autonomous exosystem  xi' = S xi,  u = amplitude * xi_0.
// Sampling the joint state transition gives exact samples of the response to
// the continuous-time input.
class DrivenRun {
 public:
  DrivenRun(const StateSpace& plant, const Matrix& S, const Vector& xi0,
            double amplitude, double fs, Index chunk)
      : chunk_(chunk) {
    const Index n = plant.states();
    const Index m = S.rows();
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = plant.A();
    aug.block(0, n, n, 1) = plant.B() * amplitude;
    aug.bottomRightCorner(m, m) = S;
    const Matrix phi = expm(aug / fs);

    RowVector out = RowVector::Zero(n + m);
    out.head(n) = plant.C().row(0);
    out(n) = plant.D()(0, 0) * amplitude;

    observe_.resize(chunk, n + m);
    RowVector row = out;
    for (Index i = 0; i < chunk; ++i) {
      observe_.row(i) = row;
      row = row * phi;
    }
    advance_ = matrix_power(phi, chunk);
    state_ = Vector::Zero(n + m);
    state_.tail(m) = xi0;
  }

  /// Output samples of the next chunk; advances the state by one chunk.
  Vector next_chunk() {
    Vector y = observe_ * state_;
    state_ = advance_ * state_;
    return y;
  }

  Index chunk() const { return chunk_; }

 private:
  Index chunk_;
  Matrix observe_;
  Matrix advance_;
  Vector state_;
};

ExperimentRecord run_driven(const StateSpace& plant, double omega,
                            const ExperimentConfig& config, Index chunk,
                            const Matrix& S, const Vector& xi0,
                            const std::function<double(Index)>& input) {
  if (!plant.is_siso()) throw DimensionMismatch("run_experiment: plant not SISO");
  DrivenRun run(plant, S, xi0, config.amplitude, config.fs, chunk);
  const Index max_samples =
      static_cast<Index>(std::floor(config.max_duration * config.fs));

  std::vector<double> ys;
  ExperimentRecord rec;
  rec.omega = omega;
  rec.config = config;
  rec.chunk_length = chunk;
  for (Index n = 0; n + chunk <= max_samples; n += chunk) {
    const Vector y = run.next_chunk();
    const SteadyStateFit fit = detect_steady_state(SampledSignal(config.fs, y),
                                                   omega, n, config.gamma);
    rec.chunk_gamma.push_back(fit.gamma_hat);
    if (fit.pass) {
      Vector u_all(n + chunk);
      for (Index i = 0; i < n + chunk; ++i) u_all(i) = input(i);
      rec.u_transient = SampledSignal(config.fs, u_all.head(n));
      rec.y_transient = SampledSignal(
          config.fs, Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size())));
      rec.u_steady = SampledSignal(config.fs, u_all.tail(chunk));
      rec.y_steady = SampledSignal(config.fs, y);
      rec.x1 = fit.x1;
      rec.x2 = fit.x2;
      rec.gamma_hat = fit.gamma_hat;
      rec.detected_at = n;
      rec.response = {omega, Complex(fit.x1, -fit.x2) / config.amplitude};
      return rec;
    }
    ys.insert(ys.end(), y.data(), y.data() + y.size());
  }
  std::ostringstream os;
  os << "no steady state within " << config.max_duration << " s at omega = "
     << omega << " rad/s (gamma " << config.gamma << ", last gamma_hat "
     << (rec.chunk_gamma.empty() ? NAN : rec.chunk_gamma.back()) << ")";
  throw SteadyStateTimeout(os.str());
}

}  // namespace

void PlantSpec::validate() const {
  if (n_modes < 1) throw ValidationError("plant: n_modes must be >= 1");
  if (!(f_lo > 0.0) || !(f_lo < f_hi)) {
    throw ValidationError("plant: need 0 < f_lo < f_hi");
  }
  if (!(zeta_lo > 0.0) || !(zeta_lo <= zeta_hi) || !(zeta_hi < 1.0)) {
    throw ValidationError("plant: need 0 < zeta_lo <= zeta_hi < 1");
  }
  if (!std::isfinite(gain_scale)) throw ValidationError("plant: bad gain scale");
}

std::vector<ModeInfo> plant_modes(const PlantSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<double> freqs(static_cast<std::size_t>(spec.n_modes));
  const double la = std::log(spec.f_lo);
  const double lb = std::log(spec.f_hi);
  for (double& f : freqs) f = std::exp(la + (lb - la) * unit_uniform(rng));
  std::sort(freqs.begin(), freqs.end());

  std::vector<ModeInfo> modes;
  modes.reserve(freqs.size());
  // Residue signs mostly repeat from one mode to the next, which keeps the
  // zeros interleaved with the poles; an occasional flip breaks the pattern.
  double sign = 1.0;
  for (double f : freqs) {
    const double zeta = spec.zeta_lo + (spec.zeta_hi - spec.zeta_lo) * unit_uniform(rng);
    const double gain = spec.gain_scale * (0.5 + unit_uniform(rng));
    if (unit_uniform(rng) < 0.25) sign = -sign;
    const double wn = kTwoPi * f;
    modes.push_back({f, zeta, sign * gain * wn * wn});
  }
  return modes;
}

StateSpace synth_plant(const PlantSpec& spec) {
  const std::vector<ModeInfo> modes = plant_modes(spec);
  const Index n = 2 * static_cast<Index>(modes.size());
  Matrix A = Matrix::Zero(n, n);
  Matrix B = Matrix::Zero(n, 1);
  Matrix C = Matrix::Zero(1, n);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const Index i = 2 * static_cast<Index>(k);
    const double wn = kTwoPi * modes[k].f_n;
    // x1' = wn x2,  x2' = -wn x1 - 2 zeta wn x2 + u,  y = (r / wn) x1
    A(i, i + 1) = wn;
    A(i + 1, i) = -wn;
    A(i + 1, i + 1) = -2.0 * modes[k].zeta * wn;
    B(i + 1, 0) = 1.0;
    C(0, i) = modes[k].residue / wn;
  }
  return StateSpace(std::move(A), std::move(B), std::move(C), Matrix::Zero(1, 1));
}

void ExperimentConfig::validate() const {
  if (!(amplitude != 0.0) || !std::isfinite(amplitude)) {
    throw ValidationError("experiment: amplitude must be nonzero");
  }
  if (!(fs > 0.0)) throw ValidationError("experiment: fs must be positive");
  if (chunk_cycles < 2) throw ValidationError("experiment: chunk_cycles >= 2");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError("experiment: gamma must lie in (0, 1)");
  }
  if (!(max_duration > 0.0)) {
    throw ValidationError("experiment: max_duration must be positive");
  }
}

void ExperimentConfig::check_frequency(double omega) const {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw ValidationError("experiment: omega must be positive");
  }
  if (fs < 10.0 * omega / kTwoPi * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "experiment: fs = " << fs << " Hz gives fewer than 10 samples per "
       << "period at " << omega / kTwoPi << " Hz";
    throw ValidationError(os.str());
  }
}

Index ExperimentConfig::chunk_length(double omega) const {
  return std::max<Index>(
      4, std::llround(static_cast<double>(chunk_cycles) * kTwoPi * fs / omega));
}

SteadyStateFit detect_steady_state(const SampledSignal& chunk, double omega,
                                   Index offset, double gamma) {
  const Index len = chunk.size();
  if (len < 1) throw ValidationError("detect_steady_state: empty chunk");
  const Vector& y = chunk.samples;
  SteadyStateFit fit;
  const double ymax = y.cwiseAbs().maxCoeff();
  if (ymax < 1e-300) {
    fit.degenerate = true;
    fit.pass = true;
    return fit;
  }
  const Index cols = omega == 0.0 ? 1 : 2;
  Matrix R(len, cols);
  for (Index i = 0; i < len; ++i) {
    const double ph = omega * static_cast<double>(offset + i) / chunk.fs;
    R(i, 0) = std::cos(ph);
    if (cols == 2) R(i, 1) = std::sin(ph);
  }
  const Vector x = R.colPivHouseholderQr().solve(y);
  const Vector r = R * x - y;
  fit.x1 = x(0);
  fit.x2 = cols == 2 ? x(1) : 0.0;
  fit.gamma_hat = r.cwiseAbs().maxCoeff() / ymax;
  fit.pass = fit.gamma_hat < gamma;
  return fit;
}

SampledSignal ExperimentRecord::full_u() const {
  return concat(u_transient, u_steady);
}

SampledSignal ExperimentRecord::full_y() const {
  return concat(y_transient, y_steady);
}

ExperimentRecord run_experiment(const StateSpace& plant, double omega,
                                const ExperimentConfig& config) {
  config.validate();
  config.check_frequency(omega);
  // xi = (cos wt, sin wt)
  Matrix S(2, 2);
  S << 0.0, -omega, omega, 0.0;
  Vector xi0(2);
  xi0 << 1.0, 0.0;
  const double amp = config.amplitude;
  const double fs = config.fs;
  return run_driven(plant, omega, config, config.chunk_length(omega), S, xi0,
                    [=](Index i) {
                      return amp * std::cos(omega * static_cast<double>(i) / fs);
                    });
}

DcEstimate estimate_dc_and_feedthrough(const StateSpace& plant,
                                       const ExperimentConfig& config,
                                       double reference_omega) {
  config.validate();
  config.check_frequency(reference_omega);
  const Matrix S = Matrix::Zero(1, 1);
  const Vector xi0 = Vector::Ones(1);
  const double amp = config.amplitude;
  DcEstimate est;
  est.record = run_driven(plant, 0.0, config, config.chunk_length(reference_omega),
                          S, xi0, [=](Index) { return amp; });
  est.K = est.record.x1 / amp;
  est.record.response = {0.0, Complex(est.K, 0.0)};
  const SampledSignal y = est.record.full_y();
  est.D = y.samples(0) / amp;
  return est;
}

}  // namespace barysid
