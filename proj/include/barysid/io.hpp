#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "barysid/plant_lab.hpp"
#include "barysid/strategy.hpp"

namespace barysid::io {

inline constexpr int kSchemaVersion = 1;

// System files are line-oriented text: a "barysid <kind>" magic line, a
// schema_version line, "key value" scalars and named matrices written as
// "name rows cols" followed by one row per line. Every floating-point value
// is a C99 hex float, so save/load is bit-exact.

void write_state_space(std::ostream& os, const StateSpace& sys);
void save_state_space(const std::filesystem::path& path, const StateSpace& sys);

/// Interpolation data, weights and the realization R.
void write_model(std::ostream& os, const InterpolantModel& model);
void save_model(const std::filesystem::path& path, const InterpolantModel& model);

/// Rebuilds bases and R from the stored data and weights.
InterpolantModel read_model(std::istream& is);
InterpolantModel load_model(const std::filesystem::path& path);

StateSpace read_state_space(std::istream& is);

/// Either file kind; a model file yields its realization R.
StateSpace load_system(const std::filesystem::path& path);

/// Record CSV (t,u,y over transient + passing block) plus a JSON sidecar
/// with the fit metadata, written as <stem>.csv and <stem>.json.
void save_record(const std::filesystem::path& stem, const ExperimentRecord& rec);

struct SignalPair {
  SampledSignal u;
  SampledSignal y;
};

/// Reads a t,u,y CSV ('#' lines are comments). Throws NonuniformSampling when
/// a time step deviates from the mean step by more than 1e-9 relative.
SignalPair read_signal_csv(std::istream& is);
SignalPair load_signal_csv(const std::filesystem::path& path);

/// One JSON object per snapshot.
void write_trace(std::ostream& os, const CampaignState& st);
void save_trace(const std::filesystem::path& path, const CampaignState& st);

enum class StrategyKind { Gridded, Adaptive };

/// Everything `identify` needs; mirrors the config file one-to-one.
/// Frequencies are in Hz here and converted to rad/s at the library boundary.
struct CampaignConfig {
  PlantSpec plant;
  std::string plant_file;  // overrides `plant` when set
  double band_lo_hz = 0.5;
  double band_hi_hz = 90.0;
  StrategyKind strategy = StrategyKind::Adaptive;
  Optimizer optimizer = Optimizer::Stable;
  double alpha = 0.0;  // rad/s, <= 0 means 1e-4 * omega_max
  ExperimentConfig experiment;
  int budget = 21;  // interpolation points, DC excluded
  double stop_tol = 1e-3;
  GridSpacing spacing = GridSpacing::Log;
  Hold hold = Hold::Foh;
  std::string output_dir = "out";

  /// Throws ValidationError.
  void validate() const;
  StrategyOptions strategy_options() const;
};

CampaignConfig parse_config(const std::string& json_text);
CampaignConfig load_config(const std::filesystem::path& path);
std::string dump_config(const CampaignConfig& cfg);

/// Throws IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string hex(double v);

}  // namespace barysid::io
