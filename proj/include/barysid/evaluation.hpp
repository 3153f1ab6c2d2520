#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "barysid/io.hpp"

namespace barysid::eval {

struct BodeRow {
  double omega;
  double mag_g, phase_g;  // phase in degrees
  double mag_r, phase_r;
  double mag_err;         // |R - G|
};

/// Both responses on a log grid over [omega_lo, omega_hi]. Points on an
/// undamped pole of either system give +inf magnitudes and NaN phases.
std::vector<BodeRow> bode(const StateSpace& plant, const StateSpace& model,
                          double omega_lo, double omega_hi, std::size_t points = 10000);
void write_bode_csv(std::ostream& os, const std::vector<BodeRow>& rows);

struct ErrorNorms {
  std::optional<double> h2;  // empty when undefined
  std::string h2_note;       // why h2 is undefined
  double linf = 0.0;
  double linf_omega = 0.0;
};

/// H2 and band-limited L-infinity norms of R - G.
ErrorNorms error_norms(const StateSpace& plant, const StateSpace& model,
                       double omega_lo, double omega_hi);

/// Pole with the largest real part.
Complex least_damped_pole(const StateSpace& sys);

/// Replays the steady-state detector over a recorded run: chunks of
/// chunk_length samples starting at 0.
struct DetectorReplay {
  std::vector<double> chunk_gamma;
  bool detected = false;
  Index detected_at = 0;  // first sample of the passing chunk
  double x1 = 0.0, x2 = 0.0;
  Complex response;       // y phasor over u phasor on the passing chunk
};
DetectorReplay replay_detector(const SampledSignal& u, const SampledSignal& y,
                               double omega, Index chunk_length, double gamma);

enum class SweepKind {
  Strategies,  // gridded vs adaptive H2 error, stable optimizer
  Optimizers,  // stable vs explicit L-infinity error, adaptive strategy
};

struct SweepCell {
  double value = 0.0;  // NaN on failure
  std::string note;    // failure reason or outlier remark
};

struct SweepRow {
  int order = 0;
  SweepCell a;  // gridded or stable
  SweepCell b;  // adaptive or explicit
};

struct SweepResult {
  SweepKind kind = SweepKind::Strategies;
  std::vector<SweepRow> rows;
  std::vector<std::string> log;  // outliers and failures, one line each
};

using Progress = std::function<void(const std::string&)>;

/// Orders must be odd and >= 5. Models land in <output_dir>/<cell>/.
/// An adaptive campaign is deterministic and its prefix up to l points is the
/// campaign with budget l, so one campaign to the largest order serves every
/// row of an adaptive column.
SweepResult run_sweep(const StateSpace& plant, const io::CampaignConfig& cfg,
                      SweepKind kind, const std::vector<int>& orders,
                      const std::filesystem::path& output_dir,
                      const Progress& progress = {});

void write_sweep_csv(std::ostream& os, const SweepResult& result);

}  // namespace barysid::eval
