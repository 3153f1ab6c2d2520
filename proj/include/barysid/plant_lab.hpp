#pragma once

#include <cstdint>
#include <vector>

#include "barysid/barycentric.hpp"
#include "barysid/lti.hpp"

namespace barysid {

/// Recipe for a synthetic lightly damped modal plant (frequencies in Hz).
struct PlantSpec {
  std::uint64_t seed = 1;
  int n_modes = 20;
  double f_lo = 0.5;
  double f_hi = 90.0;
  double zeta_lo = 0.01;
  double zeta_hi = 0.05;
  double gain_scale = 1.0;

  void validate() const;
};

struct ModeInfo {
  double f_n;      // Hz
  double zeta;
  double residue;  // numerator of  residue / (s^2 + 2 zeta w s + w^2)
};

/// Mode table the plant is built from, sorted by frequency.
std::vector<ModeInfo> plant_modes(const PlantSpec& spec);

/// Modal-form SISO plant, two states per mode, D = 0. Deterministic in seed.
StateSpace synth_plant(const PlantSpec& spec);

struct ExperimentConfig {
  double amplitude = 1.0;  // input units
  double fs = 1000.0;      // Hz
  int chunk_cycles = 4;    // chunk length L in full periods
  double gamma = 1e-3;     // residual threshold
  double max_duration = 2000.0;  // s

  void validate() const;
  /// Throws ValidationError unless fs gives at least ten samples per period
  /// and omega is below Nyquist.
  void check_frequency(double omega) const;
  /// L = round(chunk_cycles * 2 pi fs / omega).
  Index chunk_length(double omega) const;
};

struct SteadyStateFit {
  double x1 = 0.0;
  double x2 = 0.0;
  double gamma_hat = 0.0;
  bool pass = false;
  bool degenerate = false;  // all-zero block: gamma_hat := 0, pass
};

/// Least-squares fit of y_i ~ x1 cos(w i/fs) + x2 sin(w i/fs) over the block
/// i = offset .. offset + len - 1, with gamma_hat = max|r| / max|y|.
/// With omega == 0 only the constant term x1 is fitted.
SteadyStateFit detect_steady_state(const SampledSignal& chunk, double omega,
                                   Index offset, double gamma);

struct ExperimentRecord {
  double omega = 0.0;  // rad/s, 0 for the DC step run
  ExperimentConfig config;
  SampledSignal u_transient;
  SampledSignal y_transient;
  SampledSignal u_steady;  // the passing block
  SampledSignal y_steady;
  double x1 = 0.0;
  double x2 = 0.0;
  double gamma_hat = 0.0;
  FrequencySample response;
  Index detected_at = 0;
  Index chunk_length = 0;
  std::vector<double> chunk_gamma;  // gamma_hat of every chunk tested

  /// Transient followed by the passing block.
  SampledSignal full_u() const;
  SampledSignal full_y() const;
};

/// Drives the plant with u(t) = A cos(w t) from rest and stops at the first
/// chunk that passes the steady-state test. The continuous-time cosine is
/// generated by an exosystem so the samples are exact.
/// Throws SteadyStateTimeout after config.max_duration seconds.
ExperimentRecord run_experiment(const StateSpace& plant, double omega,
                                const ExperimentConfig& config);

struct DcEstimate {
  double K = 0.0;
  double D = 0.0;
  ExperimentRecord record;  // the step run, omega = 0
};

/// Step run held until a constant fit passes. D = y_0 / u_0 (exact under
/// zero-order hold); K = x1 / A. The chunk length uses reference_omega.
DcEstimate estimate_dc_and_feedthrough(const StateSpace& plant,
                                       const ExperimentConfig& config,
                                       double reference_omega);

}  // namespace barysid
