#include "barysid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "barysid/errors.hpp"

namespace barysid::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void response_at(const FrequencyResponseEvaluator& ev, double omega, double& mag,
                 double& phase, Complex& value, bool& ok) {
  try {
    value = ev.evaluate(omega);
    mag = std::abs(value);
    phase = std::arg(value) * 180.0 / std::numbers::pi;
    ok = true;
  } catch (const SingularAtFrequency&) {
    mag = kInf;
    phase = kNaN;
    ok = false;
  }
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string pole_text(const StateSpace& sys) {
  if (sys.states() == 0) return "none";
  const Complex p = least_damped_pole(sys);
  return "(" + fmt(p.real()) + " " + (p.imag() < 0 ? "-" : "+") + " " +
         fmt(std::abs(p.imag())) + "j) rad/s at " +
         fmt(std::abs(p.imag()) / (2.0 * std::numbers::pi)) + " Hz";
}

std::string csv_note(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void check_orders(const std::vector<int>& orders) {
  if (orders.empty()) throw ValidationError("sweep: no orders");
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i] < 5 || orders[i] % 2 == 0) {
      throw ValidationError("sweep: orders must be odd and >= 5 (got " +
                            std::to_string(orders[i]) + ")");
    }
    if (i > 0 && orders[i] <= orders[i - 1]) {
      throw ValidationError("sweep: orders must be strictly increasing");
    }
  }
}

std::string cell_dir(const char* column, int order) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/order_%03d", column, order);
  return buf;
}

const IterationSnapshot* snapshot_with(const CampaignState& st, Index points) {
  for (const auto& s : st.trace) {
    if (s.interp_points == points) return &s;
  }
  return nullptr;
}

SweepCell h2_cell(const StateSpace& plant, const InterpolantModel& m, double lo,
                  double hi) {
  const ErrorNorms n = error_norms(plant, m.R, lo, hi);
  if (n.h2) return {*n.h2, ""};
  return {kNaN, n.h2_note};
}

SweepCell linf_cell(const StateSpace& plant, const InterpolantModel& m, double lo,
                    double hi) {
  const ErrorNorms n = error_norms(plant, m.R, lo, hi);
  return {n.linf, ""};
}

}  // namespace

std::vector<BodeRow> bode(const StateSpace& plant, const StateSpace& model,
                          double omega_lo, double omega_hi, std::size_t points) {
  if (!plant.is_siso() || !model.is_siso()) throw DimensionMismatch("bode: SISO only");
  const std::vector<double> grid = log_grid(omega_lo, omega_hi, points);
  const FrequencyResponseEvaluator eg(plant);
  const FrequencyResponseEvaluator er(model);
  std::vector<BodeRow> rows(grid.size());
  const auto count = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < count; ++i) {
    BodeRow& r = rows[static_cast<std::size_t>(i)];
    r.omega = grid[static_cast<std::size_t>(i)];
    Complex g, m;
    bool okg = false, okm = false;
    response_at(eg, r.omega, r.mag_g, r.phase_g, g, okg);
    response_at(er, r.omega, r.mag_r, r.phase_r, m, okm);
    r.mag_err = (okg && okm) ? std::abs(m - g) : kInf;
  }
  return rows;
}

void write_bode_csv(std::ostream& os, const std::vector<BodeRow>& rows) {
  os << "# schema_version=" << io::kSchemaVersion << "\n";
  os << "omega,mag_g,phase_g_deg,mag_r,phase_r_deg,mag_err\n";
  char buf[256];
  for (const BodeRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.omega,
                  r.mag_g, r.phase_g, r.mag_r, r.phase_r, r.mag_err);
    os << buf;
  }
}

ErrorNorms error_norms(const StateSpace& plant, const StateSpace& model,
                       double omega_lo, double omega_hi) {
  const StateSpace E = difference(model, plant);
  ErrorNorms out;
  if ((E.D().array() != 0.0).any()) {
    out.h2_note = "undefined: nonzero feedthrough";
  } else if (E.states() > 0 && !(spectral_abscissa(E) < 0.0)) {
    out.h2_note = "undefined: unstable";
  } else {
    try {
      out.h2 = h2_norm(E);
    } catch (const Error& e) {
      out.h2_note = std::string("undefined: ") + e.what();
    }
  }
  const LinfResult l = linf_norm(E, omega_lo, omega_hi);
  out.linf = l.value;
  out.linf_omega = l.omega_peak;
  return out;
}

Complex least_damped_pole(const StateSpace& sys) {
  if (sys.states() == 0) throw ValidationError("least_damped_pole: no states");
  Eigen::EigenSolver<Matrix> es(sys.A(), false);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("least_damped_pole: eigensolver did not converge");
  }
  const auto& ev = es.eigenvalues();
  Index best = 0;
  for (Index i = 1; i < ev.size(); ++i) {
    if (ev(i).real() > ev(best).real() ||
        (ev(i).real() == ev(best).real() && ev(i).imag() > ev(best).imag())) {
      best = i;
    }
  }
  return ev(best);
}

DetectorReplay replay_detector(const SampledSignal& u, const SampledSignal& y,
                               double omega, Index chunk_length, double gamma) {
  if (u.size() != y.size()) throw DimensionMismatch("replay: u and y lengths differ");
  if (chunk_length < 4) throw ValidationError("replay: chunk length must be >= 4");
  DetectorReplay out;
  for (Index n = 0; n + chunk_length <= y.size(); n += chunk_length) {
    const SampledSignal yc(y.fs, y.samples.segment(n, chunk_length));
    const SteadyStateFit fit = detect_steady_state(yc, omega, n, gamma);
    out.chunk_gamma.push_back(fit.gamma_hat);
    if (!fit.pass) continue;
    const SampledSignal uc(u.fs, u.samples.segment(n, chunk_length));
    const SteadyStateFit fu = detect_steady_state(uc, omega, n, 1.0);
    const Complex up(fu.x1, -fu.x2);
    out.detected = true;
    out.detected_at = n;
    out.x1 = fit.x1;
    out.x2 = fit.x2;
    out.response = std::abs(up) > 0.0 ? Complex(fit.x1, -fit.x2) / up
                                      : Complex(kNaN, kNaN);
    break;
  }
  return out;
}

SweepResult run_sweep(const StateSpace& plant, const io::CampaignConfig& cfg,
                      SweepKind kind, const std::vector<int>& orders,
                      const std::filesystem::path& output_dir,
                      const Progress& progress) {
  check_orders(orders);
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  const double w_lo = 2.0 * std::numbers::pi * cfg.band_lo_hz;
  const double w_hi = 2.0 * std::numbers::pi * cfg.band_hi_hz;
  SweepResult res;
  res.kind = kind;
  for (int o : orders) res.rows.push_back({o, {}, {}});
  const Index l_max = (orders.back() - 1) / 2;

  StrategyOptions opts = cfg.strategy_options();
  opts.stop_tol = 0.0;
  if (kind == SweepKind::Optimizers) opts.optimizer = Optimizer::Stable;

  // Adaptive column(s): one campaign to the largest order.
  std::optional<CampaignState> camp;
  std::string camp_error;
  say("adaptive campaign to " + std::to_string(l_max) + " points");
  try {
    camp = adaptive_identify(plant, w_lo, w_hi, static_cast<int>(std::max<Index>(l_max, 3)),
                             cfg.experiment, opts);
  } catch (const Error& e) {
    camp_error = e.what();
    res.log.push_back("adaptive campaign failed: " + camp_error);
  }

  for (SweepRow& row : res.rows) {
    const Index l = (row.order - 1) / 2;
    SweepCell& adaptive_cell = kind == SweepKind::Strategies ? row.b : row.a;
    if (!camp) {
      adaptive_cell = {kNaN, camp_error};
      if (kind == SweepKind::Optimizers) row.b = {kNaN, camp_error};
      continue;
    }
    const IterationSnapshot* s = snapshot_with(*camp, l);
    if (!s) {
      adaptive_cell = {kNaN, "order not reached"};
      if (kind == SweepKind::Optimizers) row.b = {kNaN, "order not reached"};
      continue;
    }
    try {
      if (kind == SweepKind::Strategies) {
        row.b = h2_cell(plant, s->model, w_lo, w_hi);
        io::save_model(output_dir / cell_dir("adaptive", row.order) / "model.txt", s->model);
      } else {
        row.a = linf_cell(plant, s->model, w_lo, w_hi);
        row.b = linf_cell(plant, s->explicit_model, w_lo, w_hi);
        io::save_model(output_dir / cell_dir("stable", row.order) / "model.txt", s->model);
        io::save_model(output_dir / cell_dir("explicit", row.order) / "model.txt",
                       s->explicit_model);
        const double ratio = row.a.value / row.b.value;
        if (!(ratio >= 0.5 && ratio <= 2.0)) {
          std::string line = "order " + std::to_string(row.order) + ": stable/explicit " +
                             "Linf ratio " + fmt(ratio) + "; least-damped pole stable " +
                             pole_text(s->model.R) + ", explicit " +
                             pole_text(s->explicit_model.R);
          res.log.push_back(line);
          row.a.note = "outlier";
        }
      }
    } catch (const Error& e) {
      adaptive_cell = {kNaN, e.what()};
    }
  }

  if (kind == SweepKind::Strategies) {
    const auto count = static_cast<long>(res.rows.size());
    // Cells are independent; each writes only its own row and directory.
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = count - 1; i >= 0; --i) {
      SweepRow& row = res.rows[static_cast<std::size_t>(i)];
      const int l = (row.order - 1) / 2;
      try {
        const CampaignState st =
            gridded_identify(plant, w_lo, w_hi, l, cfg.experiment, opts);
        row.a = h2_cell(plant, st.current_model, w_lo, w_hi);
        io::save_model(output_dir / cell_dir("gridded", row.order) / "model.txt",
                       st.current_model);
      } catch (const Error& e) {
        row.a = {kNaN, e.what()};
      }
    }
    for (const SweepRow& row : res.rows) {
      say("order " + std::to_string(row.order) + ": gridded " + fmt(row.a.value) +
          ", adaptive " + fmt(row.b.value));
      if (!row.a.note.empty()) res.log.push_back("order " + std::to_string(row.order) + " gridded: " + row.a.note);
      if (!row.b.note.empty()) res.log.push_back("order " + std::to_string(row.order) + " adaptive: " + row.b.note);
    }
  }
  return res;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << "# schema_version=" << io::kSchemaVersion << "\n";
  if (result.kind == SweepKind::Strategies) {
    os << "order,gridded_h2,adaptive_h2,gridded_note,adaptive_note\n";
  } else {
    os << "order,stable_linf,explicit_linf,stable_note,explicit_note\n";
  }
  char buf[96];
  for (const SweepRow& r : result.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,", r.order, r.a.value, r.b.value);
    os << buf << csv_note(r.a.note) << ',' << csv_note(r.b.note) << '\n';
  }
}

}  // namespace barysid::eval
