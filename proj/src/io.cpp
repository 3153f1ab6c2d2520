#include "barysid/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "barysid/errors.hpp"

namespace barysid::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

namespace {

double parse_double(const std::string& tok) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') throw ValidationError("bad number '" + tok + "'");
  return v;
}

Index parse_index(const std::string& tok) {
  const double v = parse_double(tok);
  if (!(v >= 0.0) || v != std::floor(v)) {
    throw ValidationError("bad count '" + tok + "'");
  }
  return static_cast<Index>(v);
}

void write_matrix(std::ostream& os, const char* name, const Matrix& M) {
  os << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) os << (j ? " " : "") << hex(M(i, j));
    os << '\n';
  }
}

// Whitespace token reader over a system file.
class Tokens {
 public:
  explicit Tokens(std::istream& is) : is_(is) {}

  std::string next(const char* what) {
    std::string t;
    if (!(is_ >> t)) throw ValidationError(std::string("unexpected end of file reading ") + what);
    return t;
  }

  void expect(const std::string& word) {
    const std::string t = next(word.c_str());
    if (t != word) throw ValidationError("expected '" + word + "', found '" + t + "'");
  }

  double number(const char* what) { return parse_double(next(what)); }
  Index count(const char* what) { return parse_index(next(what)); }

  Matrix matrix(const std::string& name) {
    expect(name);
    const Index r = count("rows");
    const Index c = count("cols");
    Matrix M(r, c);
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; j < c; ++j) M(i, j) = number(name.c_str());
    }
    return M;
  }

  void header(const std::string& kind) {
    expect("barysid");
    const std::string k = next("kind");
    if (k != kind) throw ValidationError("expected a " + kind + " file, found " + k);
    expect("schema_version");
    const Index v = count("schema_version");
    if (v != kSchemaVersion) {
      throw ValidationError("unsupported schema_version " + std::to_string(v));
    }
  }

 private:
  std::istream& is_;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return is;
}

void check_written(std::ostream& os, const fs::path& path) {
  os.flush();
  if (!os) throw IoError("write failed: " + path.string());
}

json finite_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os = open_out(path);
  os << text;
  check_written(os, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream is = open_in(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_state_space(std::ostream& os, const StateSpace& sys) {
  os << "barysid state_space\n";
  os << "schema_version " << kSchemaVersion << '\n';
  os << "n " << sys.states() << "\np " << sys.inputs() << "\nq " << sys.outputs() << '\n';
  write_matrix(os, "A", sys.A());
  write_matrix(os, "B", sys.B());
  write_matrix(os, "C", sys.C());
  write_matrix(os, "D", sys.D());
}

void save_state_space(const fs::path& path, const StateSpace& sys) {
  std::ofstream os = open_out(path);
  write_state_space(os, sys);
  check_written(os, path);
}

namespace {

StateSpace read_state_space_body(Tokens& tk) {
  tk.expect("n");
  const Index n = tk.count("n");
  tk.expect("p");
  const Index p = tk.count("p");
  tk.expect("q");
  const Index q = tk.count("q");
  Matrix A = tk.matrix("A");
  Matrix B = tk.matrix("B");
  Matrix C = tk.matrix("C");
  Matrix D = tk.matrix("D");
  if (A.rows() != n || B.rows() != n || B.cols() != p || C.rows() != q ||
      C.cols() != n || D.rows() != q || D.cols() != p) {
    throw DimensionMismatch("state-space file: matrix sizes disagree with n, p, q");
  }
  return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D));
}

}  // namespace

StateSpace read_state_space(std::istream& is) {
  Tokens tk(is);
  tk.header("state_space");
  return read_state_space_body(tk);
}

void write_model(std::ostream& os, const InterpolantModel& model) {
  const InterpolationData& d = model.data;
  os << "barysid interpolant\n";
  os << "schema_version " << kSchemaVersion << '\n';
  os << "D " << hex(d.D) << '\n';
  os << "K " << hex(d.K) << '\n';
  Matrix pts(d.size(), 3);
  for (Index i = 0; i < d.size(); ++i) {
    const auto& p = d.points[static_cast<std::size_t>(i)];
    pts.row(i) << p.omega, p.value.real(), p.value.imag();
  }
  write_matrix(os, "points", pts);
  write_matrix(os, "weights", model.weights);
  os << "realization\n";
  write_state_space(os, model.R);
}

void save_model(const fs::path& path, const InterpolantModel& model) {
  std::ofstream os = open_out(path);
  write_model(os, model);
  check_written(os, path);
}

InterpolantModel read_model(std::istream& is) {
  Tokens tk(is);
  tk.header("interpolant");
  InterpolationData d;
  tk.expect("D");
  d.D = tk.number("D");
  tk.expect("K");
  d.K = tk.number("K");
  const Matrix pts = tk.matrix("points");
  if (pts.cols() != 3) throw ValidationError("model file: points need 3 columns");
  for (Index i = 0; i < pts.rows(); ++i) {
    d.points.push_back({pts(i, 0), Complex(pts(i, 1), pts(i, 2))});
  }
  const Matrix w = tk.matrix("weights");
  if (w.rows() != 1) throw ValidationError("model file: weights must be one row");
  d.validate();
  const BasisPair bases = build_bases(d);
  return assemble_model(bases, d, w.row(0));
}

InterpolantModel load_model(const fs::path& path) {
  std::ifstream is = open_in(path);
  try {
    return read_model(is);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

StateSpace load_system(const fs::path& path) {
  std::ifstream is = open_in(path);
  std::string magic, kind;
  is >> magic >> kind;
  if (magic != "barysid") throw ValidationError(path.string() + ": not a barysid file");
  is.clear();
  is.seekg(0);
  try {
    if (kind == "interpolant") return read_model(is).R;
    if (kind == "state_space") return read_state_space(is);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  throw ValidationError(path.string() + ": unknown file kind '" + kind + "'");
}

void save_record(const fs::path& stem, const ExperimentRecord& rec) {
  const SampledSignal u = rec.full_u();
  const SampledSignal y = rec.full_y();
  {
    fs::path p = stem;
    p += ".csv";
    std::ofstream os = open_out(p);
    os << "# schema_version=" << kSchemaVersion << '\n';
    os << "t,u,y\n";
    char buf[96];
    for (Index i = 0; i < u.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n",
                    static_cast<double>(i) / u.fs, u.samples(i), y.samples(i));
      os << buf;
    }
    check_written(os, p);
  }
  json j;
  j["schema_version"] = kSchemaVersion;
  j["omega"] = rec.omega;
  j["frequency_hz"] = rec.omega / (2.0 * std::numbers::pi);
  j["amplitude"] = rec.config.amplitude;
  j["fs"] = rec.config.fs;
  j["gamma"] = rec.config.gamma;
  j["chunk_length"] = rec.chunk_length;
  j["x1"] = rec.x1;
  j["x2"] = rec.x2;
  j["gamma_hat"] = rec.gamma_hat;
  j["detected_at"] = rec.detected_at;
  j["transient_samples"] = rec.u_transient.size();
  j["response"] = {rec.response.value.real(), rec.response.value.imag()};
  j["chunk_gamma"] = rec.chunk_gamma;
  fs::path p = stem;
  p += ".json";
  write_text(p, j.dump(1) + "\n");
}

SignalPair read_signal_csv(std::istream& is) {
  std::vector<double> t, u, y;
  std::string line;
  bool header_seen = false;
  Index lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen && line.find_first_of("tuy") == 0) {
      if (line != "t,u,y") throw ValidationError("signal CSV: header must be t,u,y");
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw ValidationError("signal CSV line " + std::to_string(lineno) + ": need 3 columns");
    }
    t.push_back(parse_double(a));
    u.push_back(parse_double(b));
    y.push_back(parse_double(c));
  }
  if (t.size() < 2) throw ValidationError("signal CSV: need at least 2 samples");
  const double step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(step > 0.0)) throw NonuniformSampling("signal CSV: time must increase");
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double d = t[i] - t[i - 1];
    if (std::abs(d - step) > 1e-9 * step) {
      std::ostringstream os;
      os << "signal CSV: step " << d << " at sample " << i << " deviates from " << step;
      throw NonuniformSampling(os.str());
    }
  }
  // fs from the mean step, rounded where it is within rounding of an integer
  double fs = 1.0 / step;
  if (std::abs(fs - std::round(fs)) < 1e-9 * fs) fs = std::round(fs);
  auto vec = [](const std::vector<double>& v) {
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
  };
  return {SampledSignal(fs, vec(u)), SampledSignal(fs, vec(y))};
}

SignalPair load_signal_csv(const fs::path& path) {
  std::ifstream is = open_in(path);
  return read_signal_csv(is);
}

void write_trace(std::ostream& os, const CampaignState& st) {
  for (const IterationSnapshot& s : st.trace) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["iteration"] = s.iteration;
    j["chosen_omega"] = s.chosen_omega;
    j["chosen_hz"] = s.chosen_omega / (2.0 * std::numbers::pi);
    json errs = json::array();
    for (const TestError& e : s.test_errors) {
      errs.push_back({{"omega", e.omega}, {"error", finite_or_null(e.error)}});
    }
    j["test_errors"] = errs;
    j["interp_points"] = s.interp_points;
    j["order"] = s.order;
    j["cost"] = s.cost;
    j["cost_bound"] = finite_or_null(s.cost_bound);
    j["spectral_abscissa"] = s.spectral_abscissa;
    j["experiments"] = s.experiments;
    os << j.dump() << '\n';
  }
}

void save_trace(const fs::path& path, const CampaignState& st) {
  std::ofstream os = open_out(path);
  write_trace(os, st);
  check_written(os, path);
}

void CampaignConfig::validate() const {
  if (plant_file.empty()) plant.validate();
  if (!(band_lo_hz > 0.0) || !(band_lo_hz < band_hi_hz) || !std::isfinite(band_hi_hz)) {
    throw ValidationError("config: band must satisfy 0 < lo < hi");
  }
  experiment.validate();
  experiment.check_frequency(2.0 * std::numbers::pi * band_hi_hz);
  const int min_budget = strategy == StrategyKind::Adaptive ? 3 : 2;
  if (budget < min_budget) {
    throw ValidationError("config: budget must be >= " + std::to_string(min_budget));
  }
  if (!(stop_tol >= 0.0)) throw ValidationError("config: stop_tol must be >= 0");
  if (!std::isfinite(alpha)) throw ValidationError("config: alpha must be finite");
}

StrategyOptions CampaignConfig::strategy_options() const {
  StrategyOptions o;
  o.optimizer = optimizer;
  o.alpha = alpha;
  o.stop_tol = stop_tol;
  o.spacing = spacing;
  o.covariance.hold = hold;
  return o;
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string choice(const json& j, const char* key, const std::string& dflt) {
  return j.contains(key) ? j.at(key).get<std::string>() : dflt;
}

}  // namespace

CampaignConfig parse_config(const std::string& text) {
  CampaignConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  try {
    static const char* known[] = {"schema_version", "plant", "plant_file", "band",
                                  "strategy", "optimizer", "alpha", "experiment",
                                  "budget", "stop_tol", "spacing", "hold",
                                  "output_dir", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) throw ValidationError("config: unknown key '" + it.key() + "'");
    }
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion) {
      throw ValidationError("config: unsupported schema_version");
    }
    if (j.contains("plant")) {
      const json& p = j.at("plant");
      take(p, "modes", c.plant.n_modes);
      take(p, "seed", c.plant.seed);
      take(p, "gain_scale", c.plant.gain_scale);
      if (p.contains("band")) {
        c.plant.f_lo = p.at("band").at(0).get<double>();
        c.plant.f_hi = p.at("band").at(1).get<double>();
      }
      if (p.contains("zeta")) {
        c.plant.zeta_lo = p.at("zeta").at(0).get<double>();
        c.plant.zeta_hi = p.at("zeta").at(1).get<double>();
      }
    }
    take(j, "plant_file", c.plant_file);
    if (j.contains("band")) {
      c.band_lo_hz = j.at("band").at(0).get<double>();
      c.band_hi_hz = j.at("band").at(1).get<double>();
    }
    const std::string strat = choice(j, "strategy", "adaptive");
    if (strat == "adaptive") c.strategy = StrategyKind::Adaptive;
    else if (strat == "gridded") c.strategy = StrategyKind::Gridded;
    else throw ValidationError("config: strategy must be gridded or adaptive");
    const std::string opt = choice(j, "optimizer", "stable");
    if (opt == "stable") c.optimizer = Optimizer::Stable;
    else if (opt == "explicit") c.optimizer = Optimizer::Explicit;
    else throw ValidationError("config: optimizer must be explicit or stable");
    const std::string sp = choice(j, "spacing", "log");
    if (sp == "log") c.spacing = GridSpacing::Log;
    else if (sp == "linear") c.spacing = GridSpacing::Linear;
    else throw ValidationError("config: spacing must be log or linear");
    const std::string hold = choice(j, "hold", "foh");
    if (hold == "foh") c.hold = Hold::Foh;
    else if (hold == "zoh") c.hold = Hold::Zoh;
    else throw ValidationError("config: hold must be foh or zoh");
    take(j, "alpha", c.alpha);
    if (j.contains("experiment")) {
      const json& e = j.at("experiment");
      take(e, "amplitude", c.experiment.amplitude);
      take(e, "fs", c.experiment.fs);
      take(e, "chunk_cycles", c.experiment.chunk_cycles);
      take(e, "gamma", c.experiment.gamma);
      take(e, "max_duration", c.experiment.max_duration);
    }
    take(j, "budget", c.budget);
    take(j, "stop_tol", c.stop_tol);
    take(j, "output_dir", c.output_dir);
    take(j, "seed", c.plant.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

CampaignConfig load_config(const fs::path& path) {
  return parse_config(read_text(path));
}

std::string dump_config(const CampaignConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["plant"] = {{"modes", c.plant.n_modes},
                {"seed", c.plant.seed},
                {"band", {c.plant.f_lo, c.plant.f_hi}},
                {"zeta", {c.plant.zeta_lo, c.plant.zeta_hi}},
                {"gain_scale", c.plant.gain_scale}};
  j["plant_file"] = c.plant_file;
  j["band"] = {c.band_lo_hz, c.band_hi_hz};
  j["strategy"] = c.strategy == StrategyKind::Adaptive ? "adaptive" : "gridded";
  j["optimizer"] = c.optimizer == Optimizer::Stable ? "stable" : "explicit";
  j["spacing"] = c.spacing == GridSpacing::Log ? "log" : "linear";
  j["hold"] = c.hold == Hold::Foh ? "foh" : "zoh";
  j["alpha"] = c.alpha;
  j["experiment"] = {{"amplitude", c.experiment.amplitude},
                     {"fs", c.experiment.fs},
                     {"chunk_cycles", c.experiment.chunk_cycles},
                     {"gamma", c.experiment.gamma},
                     {"max_duration", c.experiment.max_duration}};
  j["budget"] = c.budget;
  j["stop_tol"] = c.stop_tol;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.plant.seed;
  return j.dump(2) + "\n";
}

}  // namespace barysid::io
