#include "barysid/strategy.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>

#include "barysid/errors.hpp"

namespace barysid {

namespace {

std::string hz_context(const char* what, double omega) {
  std::ostringstream os;
  os.precision(6);
  os << what << " at " << omega / (2.0 * std::numbers::pi) << " Hz";
  return os.str();
}

// Re-raises campaign-level failures with the frequency that caused them.
template <typename F>
auto with_context(const std::string& ctx, F&& f) {
  try {
    return f();
  } catch (const SteadyStateTimeout& e) {
    throw SteadyStateTimeout(ctx + ": " + e.what());
  } catch (const SingularCovariance& e) {
    throw SingularCovariance(ctx + ": " + e.what());
  } catch (const Infeasible& e) {
    throw Infeasible(ctx + ": " + e.what());
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(ctx + ": " + e.what());
  } catch (const MaxIterations& e) {
    throw MaxIterations(ctx + ": " + e.what());
  }
}

ExperimentRecord experiment(const StateSpace& plant, double omega,
                            const ExperimentConfig& config) {
  return with_context(hz_context("experiment", omega),
                      [&] { return run_experiment(plant, omega, config); });
}

// Both runs of an adaptive iteration are independent.
std::array<ExperimentRecord, 2> experiment_pair(const StateSpace& plant,
                                                std::array<double, 2> omega,
                                                const ExperimentConfig& config) {
  std::array<ExperimentRecord, 2> out;
  std::array<std::exception_ptr, 2> err;
#pragma omp parallel for schedule(static, 1)
  for (int i = 0; i < 2; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          experiment(plant, omega[static_cast<std::size_t>(i)], config);
    } catch (...) {
      err[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : err) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void check_band(double omega_min, double omega_max) {
  if (!(omega_min > 0.0) || !(omega_min < omega_max) || !std::isfinite(omega_max)) {
    throw ValidationError("campaign: need 0 < omega_min < omega_max");
  }
}

double resolve_alpha(const StrategyOptions& options, double omega_max) {
  return options.alpha > 0.0 ? options.alpha : 1e-4 * omega_max;
}

void start_campaign(CampaignState& st, const StateSpace& plant, double omega_min,
                    double omega_max, const ExperimentConfig& config,
                    const StrategyOptions& options) {
  check_band(omega_min, omega_max);
  config.validate();
  config.check_frequency(omega_max);
  st.omega_min = omega_min;
  st.omega_max = omega_max;
  st.alpha = resolve_alpha(options, omega_max);
  DcEstimate dc = with_context("DC step run", [&] {
    return estimate_dc_and_feedthrough(plant, config, omega_min);
  });
  st.D = dc.D;
  st.K = dc.K;
  st.all_records.push_back(std::move(dc.record));
}

std::size_t add_record(CampaignState& st, ExperimentRecord rec) {
  st.all_records.push_back(std::move(rec));
  return st.all_records.size() - 1;
}

void insert_interp(CampaignState& st, double omega, std::size_t record) {
  const auto it = std::lower_bound(st.interp_freqs.begin(), st.interp_freqs.end(), omega);
  const auto pos = it - st.interp_freqs.begin();
  st.interp_freqs.insert(it, omega);
  st.interp_records.insert(st.interp_records.begin() + pos, record);
}

void insert_test(CampaignState& st, double omega, std::size_t record) {
  const auto it = std::lower_bound(
      st.test_pool.begin(), st.test_pool.end(), omega,
      [](const TestPoint& t, double w) { return t.omega < w; });
  st.test_pool.insert(it, TestPoint{omega, record});
}

std::vector<ExperimentRecord> test_records(const CampaignState& st) {
  std::vector<ExperimentRecord> out;
  out.reserve(st.test_pool.size());
  for (const auto& t : st.test_pool) out.push_back(st.all_records[t.record]);
  return out;
}

void refit(CampaignState& st, const StrategyOptions& options, double chosen,
           std::vector<TestError> errors) {
  const InterpolationData data = st.interpolation_data();
  ModelFit fit = with_context(
      chosen > 0.0 ? hz_context("weight solve after promoting", chosen)
                   : std::string("weight solve"),
      [&] { return fit_model(data, st.all_records, options, st.alpha); });
  IterationSnapshot snap;
  snap.iteration = st.iterations;
  snap.chosen_omega = chosen;
  snap.test_errors = std::move(errors);
  snap.interp_points = data.size();
  snap.order = fit.model.R.states();
  snap.cost = fit.cost;
  snap.cost_bound = fit.stable ? fit.stable->cost_bound
                               : std::numeric_limits<double>::quiet_NaN();
  snap.spectral_abscissa = spectral_abscissa(fit.model.R);
  snap.experiments = st.experiments();
  snap.model = fit.model;
  snap.explicit_model =
      fit.stable ? assemble_model(fit.model.bases, fit.model.data, fit.W_explicit)
                 : fit.model;
  st.current_model = fit.model;
  st.last_fit = std::move(fit);
  st.trace.push_back(std::move(snap));
}

}  // namespace

InterpolationData CampaignState::interpolation_data() const {
  InterpolationData data;
  data.D = D;
  data.K = K;
  for (std::size_t i = 0; i < interp_freqs.size(); ++i) {
    data.points.push_back(all_records[interp_records[i]].response);
  }
  return data;
}

ModelFit fit_model(const InterpolationData& data,
                   std::span<const ExperimentRecord> records,
                   const StrategyOptions& options, double alpha) {
  const BasisPair bases = build_bases(data);
  ModelFit fit;
  fit.cov = covariance_from_records(bases, data.D, records, options.covariance);
  fit.W_explicit = solve_explicit(fit.cov, options.explicit_options);
  fit.explicit_cost = problem1_cost(fit.cov, fit.W_explicit);
  RowVector W = fit.W_explicit;
  if (options.optimizer == Optimizer::Stable) {
    StableOptions so = options.stable;
    so.explicit_options = options.explicit_options;
    fit.stable = solve_stable(fit.cov, bases, alpha, so);
    W = fit.stable->W_hat;
  }
  fit.cost = problem1_cost(fit.cov, W);
  fit.model = assemble_model(bases, data, W);
  return fit;
}

std::vector<double> frequency_grid(double omega_min, double omega_max,
                                   int n_points, GridSpacing spacing) {
  check_band(omega_min, omega_max);
  if (n_points < 2) throw ValidationError("grid: need at least 2 points");
  std::vector<double> out(static_cast<std::size_t>(n_points));
  const double last = static_cast<double>(n_points - 1);
  for (int i = 0; i < n_points; ++i) {
    const double f = static_cast<double>(i) / last;
    out[static_cast<std::size_t>(i)] =
        spacing == GridSpacing::Log
            ? std::exp(std::log(omega_min) + f * (std::log(omega_max) - std::log(omega_min)))
            : omega_min + f * (omega_max - omega_min);
  }
  out.front() = omega_min;
  out.back() = omega_max;
  return out;
}

CampaignState gridded_identify(const StateSpace& plant, double omega_min,
                               double omega_max, int n_points,
                               const ExperimentConfig& config,
                               const StrategyOptions& options) {
  const std::vector<double> grid =
      frequency_grid(omega_min, omega_max, n_points, options.spacing);
  CampaignState st;
  start_campaign(st, plant, omega_min, omega_max, config, options);
  std::vector<ExperimentRecord> recs(grid.size());
  std::vector<std::exception_ptr> err(grid.size());
  const auto count = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      recs[k] = experiment(plant, grid[k], config);
    } catch (...) {
      err[k] = std::current_exception();
    }
  }
  for (const auto& e : err) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    insert_interp(st, grid[k], add_record(st, std::move(recs[k])));
  }
  refit(st, options, 0.0, {});
  return st;
}

CampaignState adaptive_identify(const StateSpace& plant, double omega_min,
                                double omega_max, int max_interp_points,
                                const ExperimentConfig& config,
                                const StrategyOptions& options) {
  if (max_interp_points < 3) {
    throw ValidationError("adaptive: max_interp_points must be >= 3");
  }
  if (!(options.stop_tol >= 0.0)) throw ValidationError("adaptive: stop_tol < 0");
  CampaignState st;
  start_campaign(st, plant, omega_min, omega_max, config, options);

  const double omega_mid = std::sqrt(omega_min * omega_max);
  std::vector<ExperimentRecord> first(3);
  const std::array<double, 3> w0{omega_min, omega_max, omega_mid};
  std::array<std::exception_ptr, 3> err;
#pragma omp parallel for schedule(static, 1)
  for (int i = 0; i < 3; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      first[k] = experiment(plant, w0[k], config);
    } catch (...) {
      err[k] = std::current_exception();
    }
  }
  for (const auto& e : err) {
    if (e) std::rethrow_exception(e);
  }
  insert_interp(st, omega_min, add_record(st, std::move(first[0])));
  insert_interp(st, omega_max, add_record(st, std::move(first[1])));
  insert_test(st, omega_mid, add_record(st, std::move(first[2])));
  refit(st, options, 0.0, {});

  double g_max = std::abs(st.K);
  for (const auto& r : st.all_records) g_max = std::max(g_max, std::abs(r.response.value));

  for (;;) {
    const std::vector<ExperimentRecord> tr = test_records(st);
    std::vector<TestError> errors = model_error_probe(st.current_model, tr);
    st.final_errors = errors;
    if (static_cast<int>(st.interp_freqs.size()) >= max_interp_points) break;
    if (errors.empty()) break;
    double worst = 0.0;
    for (const auto& e : errors) worst = std::max(worst, e.error);
    if (std::isfinite(worst) && worst < options.stop_tol * g_max) {
      st.converged = true;
      break;
    }

    const std::size_t k = pick_worst(errors);
    const TestPoint chosen = st.test_pool[k];
    st.test_pool.erase(st.test_pool.begin() + static_cast<std::ptrdiff_t>(k));
    insert_interp(st, chosen.omega, chosen.record);
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(st.interp_freqs.begin(), st.interp_freqs.end(), chosen.omega) -
        st.interp_freqs.begin());
    // Promoted points are interior, so both neighbours exist.
    assert(pos > 0 && pos + 1 < st.interp_freqs.size());
    const double w_lo = st.interp_freqs[pos - 1];
    const double w_hi = st.interp_freqs[pos + 1];
    const std::array<double, 2> nw{std::sqrt(chosen.omega * w_lo),
                                   std::sqrt(chosen.omega * w_hi)};
    for (double w : nw) {
      if (!(w > w_lo && w < w_hi) || w == chosen.omega) {
        throw DuplicateFrequency(hz_context("geometric mean collapsed", w));
      }
    }
    auto recs = experiment_pair(plant, nw, config);
    insert_test(st, nw[0], add_record(st, std::move(recs[0])));
    insert_test(st, nw[1], add_record(st, std::move(recs[1])));
    ++st.iterations;
    refit(st, options, chosen.omega, std::move(errors));
  }
  return st;
}

std::vector<TestError> model_error_probe(
    const InterpolantModel& model, std::span<const ExperimentRecord> records) {
  std::vector<TestError> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    double e;
    try {
      e = std::abs(freq_response_siso(model.R, r.omega) - r.response.value);
    } catch (const SingularAtFrequency&) {
      e = std::numeric_limits<double>::infinity();
    }
    if (std::isnan(e)) e = std::numeric_limits<double>::infinity();
    out.push_back({r.omega, e});
  }
  return out;
}

std::size_t pick_worst(std::span<const TestError> errors) {
  if (errors.empty()) throw ValidationError("pick_worst: no test errors");
  std::size_t best = 0;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const auto& a = errors[i];
    const auto& b = errors[best];
    if (a.error > b.error || (a.error == b.error && a.omega < b.omega)) best = i;
  }
  return best;
}

}  // namespace barysid
