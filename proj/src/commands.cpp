#include "barysid/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "barysid/errors.hpp"
#include "barysid/evaluation.hpp"
#include "barysid/io.hpp"

namespace barysid::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::pair<double, double> parse_range(const std::string& s, const char* what) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) {
    throw ValidationError(std::string(what) + ": expected lo:hi, got '" + s + "'");
  }
  try {
    std::size_t a = 0, b = 0;
    const std::string lo_s = s.substr(0, colon), hi_s = s.substr(colon + 1);
    const double lo = std::stod(lo_s, &a);
    const double hi = std::stod(hi_s, &b);
    if (a != lo_s.size() || b != hi_s.size()) throw std::invalid_argument(s);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ValidationError(std::string(what) + ": bad range '" + s + "'");
  }
}

std::vector<int> parse_orders(const std::string& s) {
  std::vector<int> out;
  try {
    if (s.find(':') != std::string::npos) {
      std::vector<int> parts;
      std::stringstream ss(s);
      std::string tok;
      while (std::getline(ss, tok, ':')) parts.push_back(std::stoi(tok));
      if (parts.size() < 2 || parts.size() > 3) throw std::invalid_argument(s);
      const int step = parts.size() == 3 ? parts[2] : 2;
      if (step <= 0) throw std::invalid_argument(s);
      for (int o = parts[0]; o <= parts[1]; o += step) out.push_back(o);
    } else {
      std::stringstream ss(s);
      std::string tok;
      while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    }
  } catch (const std::logic_error&) {
    throw ValidationError("orders: expected lo:hi[:step] or a comma list, got '" + s + "'");
  }
  return out;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  bool verbose = false;
  std::string output_dir;
};

class Context {
 public:
  Context(const Globals& g, std::ostream& out, std::ostream& err)
      : g_(g), out_(out), err_(err) {}

  std::ostream& out() { return out_; }

  void log(const std::string& s) {
    if (g_.verbose) err_ << "[barysid] " << s << '\n';
  }

  io::CampaignConfig base_config() const {
    io::CampaignConfig c;
    if (!g_.config.empty()) c = io::load_config(g_.config);
    if (!g_.output_dir.empty()) c.output_dir = g_.output_dir;
    if (g_.seed) c.plant.seed = *g_.seed;
    return c;
  }

 private:
  const Globals& g_;
  std::ostream& out_;
  std::ostream& err_;
};

// Flags shared by identify, evaluate and sweep; unset flags keep the config
// value. Frequencies are in Hz.
struct CampaignFlags {
  std::optional<int> modes;
  std::string plant_band, zeta;
  std::optional<double> gain;
  std::string plant_file;
  std::string band;
  std::string strategy, optimizer, spacing, hold;
  std::optional<double> alpha, stop_tol, fs, gamma, amplitude, max_duration;
  std::optional<int> budget, chunk_cycles;

  void add_plant(CLI::App* app) {
    app->add_option("--modes", modes, "synthetic plant: number of modes");
    app->add_option("--plant-band", plant_band, "synthetic plant: mode band lo:hi in Hz");
    app->add_option("--zeta", zeta, "synthetic plant: damping range lo:hi");
    app->add_option("--gain", gain, "synthetic plant: residue scale");
    app->add_option("--plant-file", plant_file, "state-space or model file used as the plant");
  }

  void add_campaign(CLI::App* app) {
    app->add_option("--band", band, "identification band lo:hi in Hz");
    app->add_option("--strategy", strategy, "gridded | adaptive");
    app->add_option("--optimizer", optimizer, "explicit | stable");
    app->add_option("--spacing", spacing, "gridded spacing: log | linear");
    app->add_option("--hold", hold, "basis-filter input reconstruction: foh | zoh");
    app->add_option("--alpha", alpha, "decay margin in rad/s (<= 0: 1e-4 * omega_max)");
    app->add_option("--budget", budget, "interpolation points, DC excluded");
    app->add_option("--stop-tol", stop_tol, "adaptive stop, relative to max measured |G|");
    app->add_option("--fs", fs, "sample rate in Hz");
    app->add_option("--gamma", gamma, "steady-state residual threshold");
    app->add_option("--amplitude", amplitude, "input amplitude");
    app->add_option("--chunk-cycles", chunk_cycles, "detector chunk length in periods");
    app->add_option("--max-duration", max_duration, "per-run time limit in s");
  }

  void apply(io::CampaignConfig& c) const {
    if (modes) c.plant.n_modes = *modes;
    if (!plant_band.empty()) std::tie(c.plant.f_lo, c.plant.f_hi) = parse_range(plant_band, "--plant-band");
    if (!zeta.empty()) std::tie(c.plant.zeta_lo, c.plant.zeta_hi) = parse_range(zeta, "--zeta");
    if (gain) c.plant.gain_scale = *gain;
    if (!plant_file.empty()) c.plant_file = plant_file;
    if (!band.empty()) std::tie(c.band_lo_hz, c.band_hi_hz) = parse_range(band, "--band");
    if (!strategy.empty()) {
      if (strategy == "gridded") c.strategy = io::StrategyKind::Gridded;
      else if (strategy == "adaptive") c.strategy = io::StrategyKind::Adaptive;
      else throw ValidationError("--strategy must be gridded or adaptive");
    }
    if (!optimizer.empty()) {
      if (optimizer == "stable") c.optimizer = Optimizer::Stable;
      else if (optimizer == "explicit") c.optimizer = Optimizer::Explicit;
      else throw ValidationError("--optimizer must be explicit or stable");
    }
    if (!spacing.empty()) {
      if (spacing == "log") c.spacing = GridSpacing::Log;
      else if (spacing == "linear") c.spacing = GridSpacing::Linear;
      else throw ValidationError("--spacing must be log or linear");
    }
    if (!hold.empty()) {
      if (hold == "foh") c.hold = Hold::Foh;
      else if (hold == "zoh") c.hold = Hold::Zoh;
      else throw ValidationError("--hold must be foh or zoh");
    }
    if (alpha) c.alpha = *alpha;
    if (budget) c.budget = *budget;
    if (stop_tol) c.stop_tol = *stop_tol;
    if (fs) c.experiment.fs = *fs;
    if (gamma) c.experiment.gamma = *gamma;
    if (amplitude) c.experiment.amplitude = *amplitude;
    if (chunk_cycles) c.experiment.chunk_cycles = *chunk_cycles;
    if (max_duration) c.experiment.max_duration = *max_duration;
  }
};

StateSpace make_plant(const io::CampaignConfig& c) {
  if (!c.plant_file.empty()) return io::load_system(c.plant_file);
  return synth_plant(c.plant);
}

std::string g6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_gen_plant(Context& ctx, const CampaignFlags& f, const std::string& out_file) {
  io::CampaignConfig c = ctx.base_config();
  f.apply(c);
  c.plant.validate();
  const StateSpace G = synth_plant(c.plant);
  const fs::path path = out_file.empty() ? fs::path(c.output_dir) / "plant.txt" : fs::path(out_file);
  io::save_state_space(path, G);
  auto& os = ctx.out();
  os << "plant: " << G.states() << " states, seed " << c.plant.seed << ", written to "
     << path.string() << '\n';
  os << "mode  f_n[Hz]      zeta         residue\n";
  int k = 0;
  for (const ModeInfo& m : plant_modes(c.plant)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%4d  %-11.6g  %-11.6g  %.6g\n", ++k, m.f_n, m.zeta,
                  m.residue);
    os << buf;
  }
  return kExitOk;
}

int cmd_identify(Context& ctx, const CampaignFlags& f, bool no_records) {
  io::CampaignConfig c = ctx.base_config();
  f.apply(c);
  c.validate();
  const StateSpace G = make_plant(c);
  const double w_lo = kTwoPi * c.band_lo_hz;
  const double w_hi = kTwoPi * c.band_hi_hz;
  const StrategyOptions opts = c.strategy_options();
  ctx.log("identify: " + std::string(c.strategy == io::StrategyKind::Adaptive ? "adaptive" : "gridded") +
          ", budget " + std::to_string(c.budget) + ", plant order " + std::to_string(G.states()));
  const CampaignState st =
      c.strategy == io::StrategyKind::Adaptive
          ? adaptive_identify(G, w_lo, w_hi, c.budget, c.experiment, opts)
          : gridded_identify(G, w_lo, w_hi, c.budget, c.experiment, opts);

  const fs::path dir = c.output_dir;
  io::save_model(dir / "model.txt", st.current_model);
  io::save_state_space(dir / "plant.txt", G);
  io::save_trace(dir / "trace.jsonl", st);
  io::write_text(dir / "config.json", io::dump_config(c));
  if (!no_records) {
    for (std::size_t i = 0; i < st.all_records.size(); ++i) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "run_%03zu", i);
      io::save_record(dir / "records" / stem, st.all_records[i]);
    }
  }

  double max_err = 0.0;
  for (const TestError& e : st.final_errors) max_err = std::max(max_err, e.error);
  const double abscissa = spectral_abscissa(st.current_model.R);
  auto& os = ctx.out();
  os << "order " << st.current_model.R.states() << '\n';
  os << "interpolation_points " << st.interp_freqs.size() << '\n';
  os << "experiments " << st.experiments() << " (1 DC + " << st.experiments() - 1
     << " sinusoidal)\n";
  os << "iterations " << st.iterations << (st.converged ? " (stop_tol reached)" : "") << '\n';
  if (!st.final_errors.empty()) os << "final_max_test_error " << g6(max_err) << '\n';
  os << "spectral_abscissa " << g6(abscissa) << (abscissa < 0.0 ? "" : " (unstable)") << '\n';
  os << "alpha " << g6(st.alpha) << '\n';
  if (st.last_fit) os << "cost " << g6(st.last_fit->cost) << '\n';
  os << "output " << dir.string() << '\n';
  return kExitOk;
}

int cmd_evaluate(Context& ctx, const CampaignFlags& f, const std::string& model_file,
                 std::size_t points, const std::string& bode_file) {
  io::CampaignConfig c = ctx.base_config();
  f.apply(c);
  if (!(c.band_lo_hz > 0.0) || !(c.band_lo_hz < c.band_hi_hz)) {
    throw ValidationError("--band must satisfy 0 < lo < hi");
  }
  if (points < 2) throw ValidationError("--points must be >= 2");
  const StateSpace R = io::load_system(model_file);
  const StateSpace G = make_plant(c);
  const double w_lo = kTwoPi * c.band_lo_hz;
  const double w_hi = kTwoPi * c.band_hi_hz;
  const auto rows = eval::bode(G, R, w_lo, w_hi, points);
  const fs::path bode_path =
      bode_file.empty() ? fs::path(c.output_dir) / "bode.csv" : fs::path(bode_file);
  std::ostringstream csv;
  eval::write_bode_csv(csv, rows);
  io::write_text(bode_path, csv.str());
  const eval::ErrorNorms n = eval::error_norms(G, R, w_lo, w_hi);
  auto& os = ctx.out();
  if (n.h2) {
    os << "h2 " << g6(*n.h2) << '\n';
  } else {
    os << "h2 " << n.h2_note << '\n';
  }
  os << "linf " << g6(n.linf) << " at " << g6(n.linf_omega / kTwoPi) << " Hz\n";
  os << "bode " << bode_path.string() << '\n';
  return kExitOk;
}

int cmd_sweep(Context& ctx, const CampaignFlags& f, const std::string& kind,
              const std::string& orders_s) {
  io::CampaignConfig c = ctx.base_config();
  f.apply(c);
  c.validate();
  const std::vector<int> orders = parse_orders(orders_s);
  const StateSpace G = make_plant(c);
  const fs::path dir = fs::path(c.output_dir);
  std::vector<std::pair<eval::SweepKind, std::string>> kinds;
  if (kind == "fig3" || kind == "both") kinds.emplace_back(eval::SweepKind::Strategies, "fig3");
  if (kind == "fig4" || kind == "both") kinds.emplace_back(eval::SweepKind::Optimizers, "fig4");
  if (kinds.empty()) throw ValidationError("--kind must be fig3, fig4 or both");
  for (const auto& [k, name] : kinds) {
    const eval::SweepResult res = eval::run_sweep(
        G, c, k, orders, dir / name, [&](const std::string& s) { ctx.log(name + ": " + s); });
    std::ostringstream csv;
    eval::write_sweep_csv(csv, res);
    io::write_text(dir / (name + ".csv"), csv.str());
    std::string log;
    for (const std::string& l : res.log) log += l + "\n";
    io::write_text(dir / (name + "_log.txt"), log);
    ctx.out() << csv.str();
    for (const std::string& l : res.log) ctx.out() << "# " << l << '\n';
  }
  return kExitOk;
}

int cmd_ss_detect(Context& ctx, const std::string& signal, double freq_hz, double gamma,
                  int chunk_cycles, long chunk_samples) {
  if (!(freq_hz > 0.0)) throw ValidationError("--freq must be > 0");
  const io::SignalPair sp = io::load_signal_csv(signal);
  const double omega = kTwoPi * freq_hz;
  ExperimentConfig ec;
  ec.fs = sp.u.fs;
  ec.gamma = gamma;
  ec.chunk_cycles = chunk_cycles;
  Index L = chunk_samples > 0 ? static_cast<Index>(chunk_samples) : ec.chunk_length(omega);
  ctx.log("fs " + g6(ec.fs) + " Hz, chunk " + std::to_string(L) + " samples");
  const eval::DetectorReplay r = eval::replay_detector(sp.u, sp.y, omega, L, gamma);
  auto& os = ctx.out();
  os << "chunk_length " << L << '\n';
  for (std::size_t i = 0; i < r.chunk_gamma.size(); ++i) {
    os << "chunk " << i << " gamma_hat " << g6(r.chunk_gamma[i]) << '\n';
  }
  if (!r.detected) {
    os << "timeout: no chunk passed gamma = " << g6(gamma) << '\n';
    return kExitInfeasible;
  }
  os << "detected_at " << r.detected_at << " (chunk " << r.detected_at / L << ")\n";
  os << "x1 " << g6(r.x1) << "\nx2 " << g6(r.x2) << '\n';
  os << "response " << g6(r.response.real()) << (r.response.imag() < 0 ? " - " : " + ")
     << g6(std::abs(r.response.imag())) << "j (|G| " << g6(std::abs(r.response))
     << ", phase " << g6(std::arg(r.response) * 180.0 / std::numbers::pi) << " deg)\n";
  return kExitOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const Infeasible*>(&e) || dynamic_cast<const SteadyStateTimeout*>(&e) ||
      dynamic_cast<const MaxIterations*>(&e)) {
    return kExitInfeasible;
  }
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DimensionMismatch*>(&e) ||
      dynamic_cast<const NonuniformSampling*>(&e) ||
      dynamic_cast<const DuplicateFrequency*>(&e)) {
    return kExitValidation;
  }
  return kExitFailure;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"barysid: barycentric frequency-domain system identification"};
  app.name("barysid");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "plant seed");
  app.add_option("--config", g.config, "campaign config JSON");
  app.add_flag("--verbose", g.verbose, "progress on stderr");
  app.add_option("--output-dir", g.output_dir, "output directory");

  CampaignFlags gen_f, id_f, ev_f, sw_f;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-plant", "write a synthetic modal plant");
  gen_f.add_plant(gen);
  gen->add_option("--band", gen_f.plant_band, "mode band lo:hi in Hz");
  gen->add_option("--out", gen_out, "output file (default <output-dir>/plant.txt)");

  bool no_records = false;
  auto* id = app.add_subcommand("identify", "run an identification campaign");
  id_f.add_plant(id);
  id_f.add_campaign(id);
  id->add_flag("--no-records", no_records, "skip the per-run CSV files");

  std::string model_file, bode_file;
  std::size_t points = 10000;
  auto* ev = app.add_subcommand("evaluate", "error norms and Bode data of a model against a plant");
  ev_f.add_plant(ev);
  ev->add_option("--band", ev_f.band, "band lo:hi in Hz");
  ev->add_option("--model", model_file, "identified model or state-space file")->required();
  ev->add_option("--points", points, "Bode grid size");
  ev->add_option("--bode", bode_file, "Bode CSV path (default <output-dir>/bode.csv)");

  std::string kind = "both", orders = "5:45:2";
  auto* sw = app.add_subcommand("sweep", "error against model order for both strategies or optimizers");
  sw_f.add_plant(sw);
  sw_f.add_campaign(sw);
  sw->add_option("--kind", kind, "fig3 (strategies) | fig4 (optimizers) | both");
  sw->add_option("--orders", orders, "lo:hi[:step] or comma list of odd orders");

  std::string signal;
  double freq = 0.0, gamma = 1e-3;
  int chunk_cycles = 4;
  long chunk_samples = 0;
  auto* ss = app.add_subcommand("ss-detect", "replay the steady-state detector on a t,u,y CSV");
  ss->add_option("--signal", signal, "t,u,y CSV")->required();
  ss->add_option("--freq", freq, "excitation frequency in Hz")->required();
  ss->add_option("--gamma", gamma, "residual threshold");
  ss->add_option("--chunk-cycles", chunk_cycles, "chunk length in periods");
  ss->add_option("--chunk", chunk_samples, "chunk length in samples (overrides --chunk-cycles)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  Context ctx(g, out, err);
  try {
    if (*gen) return cmd_gen_plant(ctx, gen_f, gen_out);
    if (*id) return cmd_identify(ctx, id_f, no_records);
    if (*ev) return cmd_evaluate(ctx, ev_f, model_file, points, bode_file);
    if (*sw) return cmd_sweep(ctx, sw_f, kind, orders);
    if (*ss) return cmd_ss_detect(ctx, signal, freq, gamma, chunk_cycles, chunk_samples);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitValidation;
}

}  // namespace barysid::cli
