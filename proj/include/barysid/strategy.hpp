#pragma once

#include <optional>
#include <span>
#include <vector>

#include "barysid/barycentric.hpp"
#include "barysid/plant_lab.hpp"
#include "barysid/weight_opt.hpp"

namespace barysid {

enum class Optimizer { Explicit, Stable };
enum class GridSpacing { Log, Linear };

struct StrategyOptions {
  Optimizer optimizer = Optimizer::Stable;
  /// Decay margin in rad/s; <= 0 means 1e-4 * omega_max.
  double alpha = 0.0;
  /// Adaptive stop: max test error < stop_tol * max measured |G|.
  double stop_tol = 1e-3;
  GridSpacing spacing = GridSpacing::Log;
  CovarianceOptions covariance;
  ExplicitOptions explicit_options;
  StableOptions stable;
};

/// Result of one weight solve.
struct ModelFit {
  InterpolantModel model;
  CovariancePartition cov;
  RowVector W_explicit;
  double cost = 0.0;            // Problem-1 cost of the returned weights
  double explicit_cost = 0.0;   // Problem-1 cost of the explicit minimizer
  std::optional<StableSolveResult> stable;
};

/// Builds the interpolant for `data` with weights solved over every record.
ModelFit fit_model(const InterpolationData& data,
                   std::span<const ExperimentRecord> records,
                   const StrategyOptions& options, double alpha);

struct TestError {
  double omega = 0.0;
  double error = 0.0;  // |R(j omega) - G_hat(j omega)|, +inf on a model pole
};

struct IterationSnapshot {
  int iteration = 0;
  double chosen_omega = 0.0;  // 0 for the initial fit and gridded runs
  std::vector<TestError> test_errors;  // errors that drove the choice
  Index interp_points = 0;
  Index order = 0;
  double cost = 0.0;
  double cost_bound = 0.0;  // NaN for the explicit optimizer
  double spectral_abscissa = 0.0;
  int experiments = 0;  // total runs so far, DC run included
  InterpolantModel model;
  /// Unconstrained minimizer on the same data; equals `model` for the
  /// explicit optimizer.
  InterpolantModel explicit_model;
};

struct TestPoint {
  double omega = 0.0;
  std::size_t record = 0;  // index into all_records
};

struct CampaignState {
  double omega_min = 0.0;
  double omega_max = 0.0;
  double alpha = 0.0;
  std::vector<double> interp_freqs;  // strictly increasing, DC excluded
  std::vector<std::size_t> interp_records;  // parallel to interp_freqs
  std::vector<TestPoint> test_pool;  // sorted by omega
  std::vector<ExperimentRecord> all_records;  // all_records[0] is the DC run
  double D = 0.0;
  double K = 0.0;
  InterpolantModel current_model;
  std::optional<ModelFit> last_fit;
  std::vector<IterationSnapshot> trace;
  int iterations = 0;
  bool converged = false;  // stopped on stop_tol rather than budget
  std::vector<TestError> final_errors;  // test errors of current_model

  int experiments() const { return static_cast<int>(all_records.size()); }
  InterpolationData interpolation_data() const;
};

/// Log (or linear) grid of n_points frequencies over [omega_min, omega_max]
/// with both ends included.
std::vector<double> frequency_grid(double omega_min, double omega_max,
                                   int n_points, GridSpacing spacing);

CampaignState gridded_identify(const StateSpace& plant, double omega_min,
                               double omega_max, int n_points,
                               const ExperimentConfig& config,
                               const StrategyOptions& options = {});

CampaignState adaptive_identify(const StateSpace& plant, double omega_min,
                                double omega_max, int max_interp_points,
                                const ExperimentConfig& config,
                                const StrategyOptions& options = {});

/// |R(j w) - G_hat(j w)| for every record, in the order given.
std::vector<TestError> model_error_probe(
    const InterpolantModel& model, std::span<const ExperimentRecord> records);

/// Index of the largest error; ties go to the lowest frequency.
std::size_t pick_worst(std::span<const TestError> errors);

}  // namespace barysid
