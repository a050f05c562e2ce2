#include "harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "raman/cumulant.hpp"
#include "raman/engine.hpp"
#include "raman/observables.hpp"
#include "raman/opalgebra.hpp"
#include "raman/oracle.hpp"
#include "raman/spectra.hpp"

namespace raman::tools {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  return out;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Config text

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Numeric literal with an optional `_2pi` suffix.  Both spellings denote the
// same physical value; the suffix only mirrors sources that quote angular
// frequencies as 2pi x (value in Hz).
double parse_number(const std::string& raw, bool allow_suffix, int line) {
  std::string text = raw;
  const auto pos = text.rfind("_2pi");
  const bool suffixed = pos != std::string::npos && pos + 4 == text.size();
  if (suffixed) {
    if (!allow_suffix)
      throw ConfigError("line " + std::to_string(line) +
                        ": unit suffix _2pi is only valid on frequencies");
    text = text.substr(0, pos);
  }
  const char* c = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(c, &end);
  if (end == c || *end != '\0' || !std::isfinite(v))
    throw ConfigError("line " + std::to_string(line) + ": malformed number '" + raw + "'");
  return v;
}

std::vector<double> parse_list(const std::string& raw, int line) {
  std::string text = raw;
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_number(tok, true, line));
  if (out.empty())
    throw ConfigError("line " + std::to_string(line) + ": empty value list");
  return out;
}

enum class Unit { frequency, time, count, dimensionless, list, word };

struct KeySpec {
  const char* key;
  Unit unit;
};

constexpr KeySpec kKnownKeys[] = {
    {"model", Unit::word},
    {"n_atoms", Unit::count},
    {"kappa", Unit::frequency},
    {"g31", Unit::frequency},
    {"Omega", Unit::frequency},
    {"gamma31", Unit::frequency},
    {"gamma12", Unit::frequency},
    {"wc", Unit::frequency},
    {"w31", Unit::frequency},
    {"w32", Unit::frequency},
    {"wd", Unit::frequency},
    {"gamma12_over_ngamma", Unit::dimensionless},
    {"t_end", Unit::time},
    {"n_out", Unit::count},
    {"rtol", Unit::dimensionless},
    {"atol", Unit::dimensionless},
    {"observation", Unit::time},
    {"sweep_values", Unit::list},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kKnownKeys)
    if (key == k.key) return &k;
  return nullptr;
}

void apply_entry(Settings& s, const ConfigEntry& e) {
  const KeySpec* spec = find_key(e.key);
  if (!spec)
    throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
  if (spec->unit == Unit::word) {
    if (e.value != "full" && e.value != "effective")
      throw ConfigError("line " + std::to_string(e.line) + ": model must be full or effective");
    s.model = e.value;
    return;
  }
  if (spec->unit == Unit::list) {
    s.sweep_values = parse_list(e.value, e.line);
    return;
  }
  const double v = parse_number(e.value, spec->unit == Unit::frequency, e.line);
  const double w = spec->unit == Unit::frequency ? kTau * v : v;
  if (e.key == "n_atoms") {
    if (v < 1.0) throw ConfigError("line " + std::to_string(e.line) + ": n_atoms must be >= 1");
    s.params.n_atoms = v;
  } else if (e.key == "kappa") s.params.kappa = w;
  else if (e.key == "g31") s.params.g31 = w;
  else if (e.key == "Omega") s.params.Omega = w;
  else if (e.key == "gamma31") s.params.gamma31 = w;
  else if (e.key == "gamma12") { s.params.gamma12 = w; s.gamma12_over_ngamma = -1.0; }
  else if (e.key == "wc") s.params.wc = w;
  else if (e.key == "w31") s.params.w31 = w;
  else if (e.key == "w32") s.params.w32 = w;
  else if (e.key == "wd") s.params.wd = w;
  else if (e.key == "gamma12_over_ngamma") {
    if (v < 0) throw ConfigError("line " + std::to_string(e.line) + ": pumping fraction < 0");
    s.gamma12_over_ngamma = v;
  } else if (e.key == "t_end") s.t_end = v;
  else if (e.key == "n_out") {
    if (v < 2 || v != std::floor(v))
      throw ConfigError("line " + std::to_string(e.line) + ": n_out must be an integer >= 2");
    s.n_out = static_cast<int>(v);
  } else if (e.key == "rtol") s.rtol = v;
  else if (e.key == "atol") s.atol = v;
  else if (e.key == "observation") {
    if (v < 0) throw ConfigError("line " + std::to_string(e.line) + ": observation span < 0");
    s.observation = v;
  }
}

// ---------------------------------------------------------------------------
// Compiled systems and shared reductions

std::shared_ptr<const CompiledSystem> compile_system(const Settings& s) {
  const PhysicalParams& p = s.params;
  if (s.model == "effective") {
    MasterEquation st = static_frame(effective_model());
    auto ms = std::make_shared<const MomentSystem>(
        complete_moment_system(st, default_seeds_effective()));
    return bind_params(ms, bind_effective(p));
  }
  MasterEquation st = static_frame(full_model());
  auto ms =
      std::make_shared<const MomentSystem>(complete_moment_system(st, default_seeds_full()));
  return bind_params(ms, bind_full(p));
}

int slot_of(const CompiledSystem& cs, const std::vector<ElementaryOp>& ops) {
  bool conj = false;
  const int var = cs.find_moment(ops, &conj);
  if (var < 0) throw RunError("required moment is not tracked by the closed system");
  return cs.offset(var);
}

double real_moment(const CompiledSystem& cs, const Eigen::VectorXd& y,
                   const std::vector<ElementaryOp>& ops) {
  bool conj = false;
  const int var = cs.find_moment(ops, &conj);
  if (var < 0) throw RunError("required moment is not tracked by the closed system");
  return cs.moment_value(y.data(), var, conj).real();
}

Settings with_resolved_pumping(const Settings& in) {
  Settings s = in;
  s.params.gamma12 = resolved_gamma12(in);
  return s;
}

double auto_span(const PhysicalParams& p) {
  const double rate = p.n_atoms * derive_effective(p).Gamma;
  return 40.0 / rate;
}

double pulse_span(const Settings& s) { return s.t_end > 0 ? s.t_end : auto_span(s.params); }

SimConfig sim_config(const Settings& s) {
  SimConfig cfg;
  cfg.rtol = s.rtol;
  cfg.atol = s.atol;
  cfg.n_out = s.n_out;
  return cfg;
}

int n_levels_of(const Settings& s) { return s.model == "effective" ? 2 : 3; }

// ---------------------------------------------------------------------------
// Summary scaffolding

json params_json(const Settings& s) {
  const PhysicalParams& p = s.params;
  json j;
  j["model"] = s.model;
  j["n_atoms"] = p.n_atoms;
  j["kappa"] = p.kappa / kTau;
  j["g31"] = p.g31 / kTau;
  j["Omega"] = p.Omega / kTau;
  j["gamma31"] = p.gamma31 / kTau;
  j["gamma12"] = resolved_gamma12(s) / kTau;
  if (s.gamma12_over_ngamma >= 0) j["gamma12_over_ngamma"] = s.gamma12_over_ngamma;
  j["wc"] = p.wc / kTau;
  j["w31"] = p.w31 / kTau;
  j["w32"] = p.w32 / kTau;
  j["wd"] = p.wd / kTau;
  j["t_end"] = pulse_span(s);
  j["n_out"] = s.n_out;
  j["rtol"] = s.rtol;
  j["atol"] = s.atol;
  j["observation"] = s.observation;
  if (!s.sweep_values.empty()) j["sweep_values"] = s.sweep_values;
  try {
    const EffectiveParams eff = derive_effective(p);
    json d;
    d["g21_abs"] = std::abs(eff.g21) / kTau;
    d["gamma21"] = eff.gamma21 / kTau;
    d["Gamma"] = eff.Gamma / kTau;
    d["n_gamma"] = p.n_atoms * eff.Gamma / kTau;
    d["detuning"] = eff.detuning / kTau;
    d["adiabatic_ratio"] = eff.ratio;
    j["derived"] = d;
  } catch (const std::exception&) {
    // resonant drive: no adiabatic branch to report
  }
  return j;
}

json units_json() {
  json u;
  u["frequencies"] = "Hz (config may append _2pi: 5e6 and 5e6_2pi are the same frequency)";
  u["columns ending in _s"] = "seconds";
  u["freq_hz, shift, fwhm, gamma12, Omega, Delta"] = "Hz";
  u["power"] = "photon flux density per Hz of ordinary frequency";
  u["n_atoms, photon_number, populations, j_bar, m_bar"] = "dimensionless";
  return u;
}

json start_summary(const std::string& name, const char* kind, const Settings& s) {
  json j;
  j["name"] = name;
  j["kind"] = kind;
  j["code_version"] = kCodeVersion;
  j["config"] = params_json(s);
  j["units"] = units_json();
  return j;
}

json metrics_json(const PulseMetrics& pm) {
  json j;
  j["peak"] = pm.peak;
  j["t_peak_s"] = pm.t_peak;
  j["fwhm_s"] = pm.fwhm;
  j["delay_s"] = pm.delay;
  j["t_rise_s"] = pm.t_rise;
  j["t_decay_s"] = pm.t_decay;
  j["n_tail_maxima"] = pm.n_tail_maxima;
  return j;
}

// ---------------------------------------------------------------------------
// Shared physics reductions

CsvTable timeseries_table(const CompiledSystem& cs, const Trajectory& tr, int n_levels) {
  CsvTable t;
  t.columns = {"t_s", "photon_number"};
  std::vector<std::vector<ElementaryOp>> pops;
  for (int l = 1; l <= n_levels; ++l) {
    t.columns.push_back("pop" + std::to_string(l));
    pops.push_back({transition(1, l, l)});
  }
  t.columns.push_back("j_bar");
  t.columns.push_back("m_bar");
  const std::vector<ElementaryOp> photon = {boson_create(), boson_annihilate()};
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    std::vector<double> row;
    row.push_back(tr.t[i]);
    row.push_back(real_moment(cs, tr.y[i], photon));
    for (const auto& ops : pops) row.push_back(real_moment(cs, tr.y[i], ops));
    const DickeCoordinates dc = dicke_coordinates(cs, tr.y[i]);
    row.push_back(dc.j);
    row.push_back(dc.m);
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct SteadyReport {
  Eigen::VectorXd y;
  double n_ss = 0.0;
  double residual = 0.0;
};

SteadyReport steady_report(const Settings& s, const CompiledSystem& cs) {
  if (s.params.gamma12 <= 0)
    throw RunError("stationary runs need a positive repumping rate gamma12");
  SimConfig cfg = sim_config(s);
  cfg.n_out = 0;
  const SteadyState ss = find_steady_state(cs, all_atoms_on_level(cs, 2), cfg);
  SteadyReport r;
  r.y = ss.y;
  r.n_ss = real_moment(cs, ss.y, {boson_create(), boson_annihilate()});
  r.residual = ss.residual;
  return r;
}

struct LineReport {
  double n_ss = 0.0;
  double shift_exact = 0.0;  // Hz
  double fwhm_exact = 0.0;   // Hz
  double shift = 0.0;        // Hz; equals the exact value when observation = 0
  double fwhm = 0.0;
  bool windowed = false;
};

// Slow-mode line parameters at the pumped stationary point; a positive
// observation span adds the window-limited read of the same line.
LineReport line_report(const Settings& s, const CompiledSystem& cs,
                       const SteadyReport& steady) {
  const CorrelationSystem corr = derive_correlation_system(cs, steady.y);
  const std::vector<Mode> modes = correlation_modes(corr);
  if (modes.empty()) throw RunError("output correlation vanishes; no emission line");
  LineReport r;
  r.n_ss = steady.n_ss;
  r.shift_exact = modes.front().lambda.imag() / kTau;
  r.fwhm_exact = 2.0 * std::abs(modes.front().lambda.real()) / kTau;
  if (s.observation > 0) {
    SpectrumOptions opts;
    opts.observation = s.observation;
    const SpectrumResult sr = emission_spectrum(corr, s.params.kappa, opts);
    const LineMeasurement lm = measure_line(sr.omega, sr.power);
    r.shift = lm.center / kTau;
    r.fwhm = lm.fwhm / kTau;
    r.windowed = true;
  } else {
    r.shift = r.shift_exact;
    r.fwhm = r.fwhm_exact;
  }
  return r;
}

json line_json(const LineReport& r) {
  json j;
  j["n_ss"] = r.n_ss;
  j["shift"] = r.shift;
  j["fwhm"] = r.fwhm;
  j["shift_exact"] = r.shift_exact;
  j["fwhm_exact"] = r.fwhm_exact;
  j["windowed"] = r.windowed;
  return j;
}

CsvTable spectrum_table(const SpectrumResult& sr) {
  CsvTable t;
  t.columns = {"freq_hz", "power"};
  for (std::size_t i = 0; i < sr.omega.size(); ++i)
    t.rows.push_back({sr.omega[i] / kTau, sr.power[i]});
  return t;
}

// ---------------------------------------------------------------------------
// Sweep plumbing

struct AxisSpec {
  std::string column;      // CSV column name for the swept value
  bool frequency = false;  // CSV value in Hz, settings value in rad/s
};

AxisSpec axis_spec(const std::string& axis) {
  if (axis == "N") return {"n_atoms", false};
  if (axis == "Omega") return {"Omega", true};
  if (axis == "Delta") return {"Delta", true};
  if (axis == "gamma12") return {"gamma12", true};
  if (axis == "gamma12_frac") return {"gamma12", false};
  throw RunError("unknown sweep axis '" + axis + "' (N, Omega, Delta, gamma12, gamma12_frac)");
}

// `v` in rad/s for frequency axes, raw otherwise.
Settings with_axis(const Settings& base, const std::string& axis, double v) {
  Settings s = base;
  if (axis == "N") {
    s.params.n_atoms = v;
  } else if (axis == "Omega") {
    s.params.Omega = v;
  } else if (axis == "Delta") {
    // move the drive and track the cavity so the two-photon resonance holds
    s.params.wd = s.params.w32 + v;
    s.params.wc = s.params.w31 + v;
  } else if (axis == "gamma12") {
    s.params.gamma12 = v;
    s.gamma12_over_ngamma = -1.0;
  } else if (axis == "gamma12_frac") {
    s.gamma12_over_ngamma = v;
  } else {
    throw RunError("unknown sweep axis '" + axis + "'");
  }
  return s;
}

std::map<std::string, double> pulse_point(const Settings& s) {
  const Settings r = with_resolved_pumping(s);
  auto cs = compile_system(r);
  const Trajectory tr =
      integrate(*cs, all_atoms_on_level(*cs, 2), 0.0, pulse_span(r), sim_config(r));
  const PulseMetrics pm =
      pulse_metrics(tr, slot_of(*cs, {boson_create(), boson_annihilate()}));
  return {{"peak", pm.peak},     {"t_peak_s", pm.t_peak},   {"fwhm_s", pm.fwhm},
          {"delay_s", pm.delay}, {"t_rise_s", pm.t_rise},   {"t_decay_s", pm.t_decay},
          {"n_tail_maxima", static_cast<double>(pm.n_tail_maxima)}};
}

std::map<std::string, double> steady_point(const Settings& s) {
  const Settings r = with_resolved_pumping(s);
  auto cs = compile_system(r);
  const SteadyReport sr = steady_report(r, *cs);
  const DickeCoordinates dc = dicke_coordinates(*cs, sr.y);
  return {{"n_ss", sr.n_ss}, {"j_bar", dc.j}, {"m_bar", dc.m}};
}

std::map<std::string, double> spectrum_point(const Settings& s) {
  const Settings r = with_resolved_pumping(s);
  auto cs = compile_system(r);
  const SteadyReport steady = steady_report(r, *cs);
  const LineReport line = line_report(r, *cs, steady);
  return {{"n_ss", line.n_ss},
          {"shift", line.shift},
          {"fwhm", line.fwhm},
          {"shift_exact", line.shift_exact},
          {"fwhm_exact", line.fwhm_exact}};
}

const std::vector<std::string>& metric_columns(const std::string& metric) {
  static const std::vector<std::string> pulse = {
      "peak", "t_peak_s", "fwhm_s", "delay_s", "t_rise_s", "t_decay_s", "n_tail_maxima"};
  static const std::vector<std::string> steady = {"n_ss", "j_bar", "m_bar"};
  static const std::vector<std::string> spectrum = {"n_ss", "shift", "fwhm", "fwhm_exact",
                                                    "shift_exact"};
  if (metric == "pulse") return pulse;
  if (metric == "steady") return steady;
  if (metric == "spectrum") return spectrum;
  throw RunError("unknown sweep metric '" + metric + "' (pulse, steady, spectrum)");
}

// Log-log fits over points where both sides are positive; |y| for signed
// metrics like the line shift.
void add_fits(json& summary, const SweepTable& table, const AxisSpec& axis,
              const std::vector<std::string>& ycols) {
  json fits;
  for (const auto& col : ycols) {
    std::vector<double> xs, ys;
    for (const auto& pt : table.points) {
      if (!pt.error.empty()) continue;
      const auto it = pt.out.find(col);
      if (it == pt.out.end()) continue;
      const double x = axis.frequency ? pt.value / kTau : pt.value;
      const double y = std::abs(it->second);
      if (x > 0 && y > 0) {
        xs.push_back(x);
        ys.push_back(y);
      }
    }
    if (xs.size() < 3) continue;
    const LineFit f = fit_loglog(xs, ys);
    fits[col + "_loglog"] = {{"slope", f.slope}, {"intercept", f.intercept}};
  }
  if (!fits.empty()) summary["fits"] = fits;
}

struct SweepOutcome {
  CsvTable table;
  json point_errors = json::array();
  int n_ok = 0;
};

SweepOutcome collect_sweep(const SweepTable& st, const AxisSpec& axis, const Settings& base,
                           const std::string& sweep_axis,
                           const std::vector<std::string>& ycols) {
  SweepOutcome out;
  out.table.columns.push_back(axis.column);
  for (const auto& c : ycols) out.table.columns.push_back(c);
  for (const auto& pt : st.points) {
    double shown = axis.frequency ? pt.value / kTau : pt.value;
    if (sweep_axis == "gamma12_frac") {
      // the pinned column carries the absolute rate in Hz
      const Settings s = with_resolved_pumping(with_axis(base, sweep_axis, pt.value));
      shown = s.params.gamma12 / kTau;
    }
    if (!pt.error.empty()) {
      out.point_errors.push_back({{"value", shown}, {"error", pt.error}});
      continue;
    }
    std::vector<double> row{shown};
    for (const auto& c : ycols) row.push_back(pt.out.at(c));
    out.table.rows.push_back(std::move(row));
    ++out.n_ok;
  }
  return out;
}

ScenarioResult sweep_impl(const Settings& s, const std::string& axis_name,
                          const std::string& metric, int threads, const std::string& id,
                          const char* kind) {
  const auto t0 = Clock::now();
  if (s.sweep_values.empty()) throw RunError("sweep needs sweep_values");
  const AxisSpec axis = axis_spec(axis_name);
  const auto& ycols = metric_columns(metric);

  std::vector<double> values = s.sweep_values;
  if (axis.frequency)
    for (auto& v : values) v *= kTau;

  const PointRunner run = [&](double v) {
    const Settings pt = with_axis(s, axis_name, v);
    if (metric == "pulse") return pulse_point(pt);
    if (metric == "steady") return steady_point(pt);
    return spectrum_point(pt);
  };
  const SweepTable st = sweep_points(axis.column, values, run, threads);
  const SweepOutcome out = collect_sweep(st, axis, s, axis_name, ycols);

  ScenarioResult res;
  res.name = id;
  res.summary = start_summary(id, kind, s);
  res.summary["sweep"] = {{"axis", axis.column}, {"metric", metric}, {"n_points", values.size()},
                          {"n_ok", out.n_ok}};
  if (metric == "pulse") add_fits(res.summary, st, axis, {"peak", "fwhm_s", "delay_s"});
  if (metric == "spectrum")
    add_fits(res.summary, st, axis, {"n_ss", "shift", "fwhm", "fwhm_exact"});
  if (!out.point_errors.empty()) res.summary["point_errors"] = out.point_errors;
  res.summary["wall_time_s"] = seconds_since(t0);
  res.tables.emplace_back(id + "_sweep", out.table);
  res.total_failure = out.n_ok == 0;
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string entry = trim(raw);
    if (entry.empty()) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    ConfigEntry e;
    e.key = trim(entry.substr(0, eq));
    e.value = trim(entry.substr(eq + 1));
    e.line = line;
    if (e.key.empty() || e.value.empty())
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    cfg.entries.push_back(std::move(e));
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_config(Settings& s, const Config& cfg) {
  for (const auto& e : cfg.entries) apply_entry(s, e);
  if (s.rtol <= 0 || s.atol <= 0) throw ConfigError("tolerances must be positive");
  if (s.t_end < 0) throw ConfigError("t_end must be >= 0");
}

void apply_regime(Settings& s, const std::string& regime) {
  if (regime == "crossover") s.params.n_atoms = 1e4;
  else if (regime == "strong") s.params.n_atoms = 1e6;
  else throw ConfigError("unknown regime '" + regime + "' (crossover, strong)");
}

double resolved_gamma12(const Settings& s) {
  if (s.gamma12_over_ngamma < 0) return s.params.gamma12;
  return s.gamma12_over_ngamma * s.params.n_atoms * derive_effective(s.params).Gamma;
}

// ---------------------------------------------------------------------------
// Runners

ScenarioResult run_pulse(const Settings& in, const std::string& id) {
  const auto t0 = Clock::now();
  const Settings s = with_resolved_pumping(in);
  auto cs = compile_system(s);
  const double span = pulse_span(s);
  const Trajectory tr = integrate(*cs, all_atoms_on_level(*cs, 2), 0.0, span, sim_config(s));

  ScenarioResult res;
  res.name = id;
  res.summary = start_summary(id, "pulse", in);
  res.tables.emplace_back(id + "_timeseries", timeseries_table(*cs, tr, n_levels_of(s)));

  json metrics;
  try {
    metrics["pulse"] =
        metrics_json(pulse_metrics(tr, slot_of(*cs, {boson_create(), boson_annihilate()})));
  } catch (const NoPulseError& e) {
    metrics["pulse"] = {{"error", e.what()}};
  }
  if (s.params.gamma12 > 0) {
    const SteadyReport ss = steady_report(s, *cs);
    json stat;
    stat["n_ss"] = ss.n_ss;
    stat["residual"] = ss.residual;
    const DickeCoordinates dc = dicke_coordinates(*cs, ss.y);
    stat["j_bar"] = dc.j;
    stat["m_bar"] = dc.m;
    stat["line"] = line_json(line_report(s, *cs, ss));
    metrics["stationary"] = stat;
  }
  res.summary["metrics"] = metrics;
  res.summary["integrator"] = tr.method_used;
  res.summary["wall_time_s"] = seconds_since(t0);
  return res;
}

ScenarioResult run_steady(const Settings& in, const std::string& id) {
  const auto t0 = Clock::now();
  const Settings s = with_resolved_pumping(in);
  auto cs = compile_system(s);
  const SteadyReport ss = steady_report(s, *cs);
  const DickeCoordinates dc = dicke_coordinates(*cs, ss.y);
  const BlochVector b = bloch_vector(*cs, ss.y);

  CsvTable t;
  t.columns = {"n_ss"};
  std::vector<double> row{ss.n_ss};
  for (int l = 1; l <= n_levels_of(s); ++l) {
    t.columns.push_back("pop" + std::to_string(l));
    row.push_back(real_moment(*cs, ss.y, {transition(1, l, l)}));
  }
  t.columns.insert(t.columns.end(), {"j_bar", "m_bar", "bloch_x", "bloch_y", "bloch_z"});
  row.insert(row.end(), {dc.j, dc.m, b.x, b.y, b.z});
  t.rows.push_back(std::move(row));

  ScenarioResult res;
  res.name = id;
  res.summary = start_summary(id, "steady", in);
  res.summary["metrics"] = {{"n_ss", ss.n_ss}, {"residual", ss.residual},
                            {"j_bar", dc.j},   {"m_bar", dc.m}};
  res.summary["wall_time_s"] = seconds_since(t0);
  res.tables.emplace_back(id + "_steady", t);
  return res;
}

ScenarioResult run_spectrum(const Settings& in, const std::string& id) {
  const auto t0 = Clock::now();
  const Settings s = with_resolved_pumping(in);
  auto cs = compile_system(s);
  const SteadyReport ss = steady_report(s, *cs);
  const CorrelationSystem corr = derive_correlation_system(*cs, ss.y);

  ScenarioResult res;
  res.name = id;
  res.summary = start_summary(id, "spectrum", in);

  const SpectrumResult exact = emission_spectrum(corr, s.params.kappa);
  res.tables.emplace_back(id + "_spectrum", spectrum_table(exact));
  json metrics = line_json(line_report(s, *cs, ss));
  metrics["horizon_s"] = exact.horizon;
  if (s.observation > 0) {
    SpectrumOptions opts;
    opts.observation = s.observation;
    const SpectrumResult win = emission_spectrum(corr, s.params.kappa, opts);
    res.tables.emplace_back(id + "_spectrum_windowed", spectrum_table(win));
  }
  res.summary["metrics"] = metrics;
  res.summary["wall_time_s"] = seconds_since(t0);
  return res;
}

ScenarioResult run_sweep(const Settings& s, const std::string& axis, const std::string& metric,
                         int threads, const std::string& id) {
  return sweep_impl(s, axis, metric, threads, id, "sweep");
}

// ---------------------------------------------------------------------------
// Scenario registry

namespace {

Settings scenario_settings(const std::string& name) {
  Settings s;  // reference crossover parameters
  if (name == "fig2a") {
    s.t_end = 8e-4;
  } else if (name == "fig2b") {
    s.sweep_values = logspace(5e3, 5e4, 9);
  } else if (name == "fig2c") {
    s.sweep_values = logspace(2.5e6, 1e7, 7);
  } else if (name == "fig2d") {
    s.sweep_values = logspace(1e9, 4e9, 7);
  } else if (name == "fig3a") {
    s.params.n_atoms = 1e6;
    s.t_end = 3e-5;
    s.n_out = 1500;
  } else if (name == "fig3b") {
    s.params.n_atoms = 1e6;
    s.sweep_values = logspace(2e5, 5e6, 7);
  } else if (name == "fig3c") {
    s.params.n_atoms = 1e6;
    s.sweep_values = logspace(1e9, 4e9, 7);
  } else if (name == "fig3d") {
    s.params.n_atoms = 5e7;
    s.t_end = 2e-6;
    s.n_out = 2500;
  } else if (name == "fig4a") {
    s.gamma12_over_ngamma = 0.93;
    s.t_end = 1.5e-3;
    s.n_out = 1500;
    s.observation = 2e-4;
  } else if (name == "fig4b") {
    s.gamma12_over_ngamma = 0.5;
    s.observation = 2e-4;
  } else if (name == "fig4c") {
    s.gamma12_over_ngamma = 0.5;
    s.observation = 2e-4;
    s.sweep_values = linspace(0.05, 2.0, 40);
  } else if (name == "fig4d") {
    s.gamma12_over_ngamma = 0.5;
    s.observation = 2e-4;
    s.sweep_values = logspace(2.5e6, 1e7, 8);
  } else if (name == "figA1") {
    s.model = "effective";
    s.params.n_atoms = 1e6;
    s.t_end = 3e-5;
  } else if (name == "figA2") {
    s.params.n_atoms = 1e6;
    s.sweep_values = logspace(2.5e6, 1e7, 7);
  } else if (name == "figA3") {
    s.gamma12_over_ngamma = 0.5;
    for (double g : {-4.0, -3.0, -2.5, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0})
      s.sweep_values.push_back(g * 1e9);
  } else if (name == "figA4") {
    s.params.n_atoms = 1e6;
    s.gamma12_over_ngamma = 0.5;
    s.t_end = 1.5e-5;
    s.n_out = 1500;
    s.observation = 2e-4;
  } else {
    throw RunError("unknown scenario '" + name + "'");
  }
  return s;
}

ScenarioResult run_fig4b(const Settings& base, const std::string& id) {
  const auto t0 = Clock::now();
  ScenarioResult res;
  res.name = id;
  res.summary = start_summary(id, "spectrum", base);
  json metrics;

  for (const char* model : {"full", "effective"}) {
    Settings s = base;
    s.model = model;
    // the contrast lives in the resolved linewidths: only the full-model
    // read carries the finite observation span
    if (s.model == "effective") s.observation = 0.0;
    s = with_resolved_pumping(s);
    auto cs = compile_system(s);
    const SteadyReport ss = steady_report(s, *cs);
    const CorrelationSystem corr = derive_correlation_system(*cs, ss.y);
    const SpectrumResult exact = emission_spectrum(corr, s.params.kappa);
    res.tables.emplace_back(id + "_spectrum_" + model, spectrum_table(exact));
    metrics[model] = line_json(line_report(s, *cs, ss));
    if (s.observation > 0 && s.model == "full") {
      SpectrumOptions opts;
      opts.observation = s.observation;
      const SpectrumResult win = emission_spectrum(corr, s.params.kappa, opts);
      res.tables.emplace_back(id + "_spectrum_" + model + "_windowed", spectrum_table(win));
    }
  }
  res.summary["metrics"] = metrics;
  res.summary["wall_time_s"] = seconds_since(t0);
  return res;
}

// Effective-model panel pair: the strong-regime pulse stays an ordinary
// pulse, and the stationary linewidth has an interior minimum in the pumping.
ScenarioResult run_figA1(const Settings& base, int threads, const std::string& id) {
  const auto t0 = Clock::now();
  ScenarioResult res;
  res.name = id;
  res.summary = start_summary(id, "sweep", base);
  json metrics;

  {
    const Settings s = with_resolved_pumping(base);
    auto cs = compile_system(s);
    const Trajectory tr =
        integrate(*cs, all_atoms_on_level(*cs, 2), 0.0, pulse_span(s), sim_config(s));
    res.tables.emplace_back(id + "_pulse", timeseries_table(*cs, tr, n_levels_of(s)));
    try {
      metrics["pulse"] =
          metrics_json(pulse_metrics(tr, slot_of(*cs, {boson_create(), boson_annihilate()})));
    } catch (const NoPulseError& e) {
      metrics["pulse"] = {{"error", e.what()}};
    }
  }

  Settings sw = base;
  sw.params.n_atoms = 1e4;  // stationary branch at the crossover scale
  sw.t_end = 0.0;
  sw.observation = 0.0;  // linewidths from the exact slow mode
  sw.sweep_values = logspace(0.01, 2.0, 24);
  ScenarioResult sweep = sweep_impl(sw, "gamma12_frac", "spectrum", threads, id, "sweep");
  for (auto& t : sweep.tables) res.tables.emplace_back(id + "_pumping_sweep", t.second);
  res.summary["sweep_config"] = sweep.summary["config"];
  res.summary["sweep"] = sweep.summary["sweep"];
  if (sweep.summary.contains("point_errors"))
    res.summary["point_errors"] = sweep.summary["point_errors"];

  const auto& table = res.tables.back().second;
  double best = 0.0, best_g = 0.0;
  bool have = false;
  for (const auto& row : table.rows) {
    const double fwhm = row[3];
    if (!have || fwhm < best) {
      best = fwhm;
      best_g = row[0];
      have = true;
    }
  }
  if (have) metrics["linewidth_min"] = {{"fwhm", best}, {"gamma12", best_g}};
  res.summary["metrics"] = metrics;
  res.summary["wall_time_s"] = seconds_since(t0);
  res.total_failure = sweep.total_failure;
  return res;
}

struct ScenarioDef {
  ScenarioInfo info;
  std::function<ScenarioResult(const Settings&, int, const std::string&)> run;
};

const std::vector<ScenarioDef>& scenario_defs() {
  auto pulse = [](const Settings& s, int, const std::string& id) { return run_pulse(s, id); };
  auto sweep = [](const char* axis, const char* metric) {
    return [axis, metric](const Settings& s, int threads, const std::string& id) {
      return sweep_impl(s, axis, metric, threads, id, "sweep");
    };
  };
  static const std::vector<ScenarioDef> defs = {
      {{"fig2a", "pulse", "superradiant pulse, full model, N = 1e4"}, pulse},
      {{"fig2b", "sweep", "pulse shape vs atom number, N in [5e3, 5e4]"}, sweep("N", "pulse")},
      {{"fig2c", "sweep", "pulse shape vs drive strength Omega"}, sweep("Omega", "pulse")},
      {{"fig2d", "sweep", "pulse shape vs drive detuning Delta"}, sweep("Delta", "pulse")},
      {{"fig3a", "pulse", "distorted pulse at strong collective coupling, N = 1e6"}, pulse},
      {{"fig3b", "sweep", "pulse shape vs atom number, N in [2e5, 5e6]"}, sweep("N", "pulse")},
      {{"fig3c", "sweep", "strong-coupling pulse vs drive detuning"}, sweep("Delta", "pulse")},
      {{"fig3d", "pulse", "ringing pulse tail, N = 5e7"}, pulse},
      {{"fig4a", "pulse", "relaxation to the pumped stationary state, N = 1e4"}, pulse},
      {{"fig4b", "spectrum", "stationary emission line, full vs effective model"},
       [](const Settings& s, int, const std::string& id) { return run_fig4b(s, id); }},
      {{"fig4c", "sweep", "stationary line vs pumping rate"},
       sweep("gamma12_frac", "spectrum")},
      {{"fig4d", "sweep", "stationary line vs drive strength, pumping co-scaled"},
       sweep("Omega", "spectrum")},
      {{"figA1", "sweep", "effective model: strong-regime pulse and linewidth vs pumping"},
       [](const Settings& s, int threads, const std::string& id) {
         return run_figA1(s, threads, id);
       }},
      {{"figA2", "sweep", "strong-coupling pulse vs drive strength"}, sweep("Omega", "pulse")},
      {{"figA3", "sweep", "line shift vs signed drive detuning"}, sweep("Delta", "spectrum")},
      {{"figA4", "pulse", "pumped stationary state at strong coupling, N = 1e6"}, pulse},
  };
  return defs;
}

}  // namespace

const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> list = [] {
    std::vector<ScenarioInfo> out;
    for (const auto& d : scenario_defs()) out.push_back(d.info);
    return out;
  }();
  return list;
}

const ScenarioInfo* find_scenario(const std::string& name) {
  for (const auto& s : scenarios())
    if (name == s.name) return &s;
  return nullptr;
}

ScenarioResult run_scenario(const std::string& name, const Config& overrides, int threads) {
  for (const auto& d : scenario_defs()) {
    if (name != d.info.name) continue;
    Settings s = scenario_settings(name);
    apply_config(s, overrides);
    ScenarioResult res = d.run(s, threads, name);
    res.summary["kind"] = d.info.kind;
    res.summary["description"] = d.info.description;
    return res;
  }
  throw RunError("unknown scenario '" + name + "'");
}

// ---------------------------------------------------------------------------
// Derivation checks against the dense solver

namespace {

ParamBindings resolved_bindings(const MasterEquation& me, ParamBindings b) {
  for (const auto& def : me.defs) {
    double v = 0.0;
    for (const auto& [id, mult] : def.combo) v += mult * b.get(id).real();
    b.values[def.param] = cplx(v, 0.0);
  }
  return b;
}

// A register-summed jump denotes one channel per concrete atom.
std::vector<std::pair<Coefficient, OperatorExpr>> concrete_channels(const MasterEquation& me,
                                                                    int n_atoms) {
  std::vector<std::pair<Coefficient, OperatorExpr>> out;
  for (const auto& ch : me.channels) {
    bool summed = false;
    for (const auto& t : ch.jump.terms())
      for (const auto& op : t.ops)
        summed = summed || (op.kind == OpKind::transition && op.atom == kSummedAtom);
    if (!summed) {
      out.emplace_back(ch.rate, ch.jump);
      continue;
    }
    for (int a = 1; a <= n_atoms; ++a) {
      std::vector<OperatorTerm> terms;
      for (OperatorTerm t : ch.jump.terms()) {
        for (auto& op : t.ops)
          if (op.kind == OpKind::transition && op.atom == kSummedAtom)
            op.atom = static_cast<std::int16_t>(a);
        terms.push_back(std::move(t));
      }
      out.emplace_back(ch.rate, OperatorExpr(std::move(terms)));
    }
  }
  return out;
}

OperatorExpr key_expr(const MomentKey& key) {
  OperatorTerm t;
  t.ops = key;
  return OperatorExpr(t);
}

Matrix band_projector(const SystemDims& dims, int keep) {
  Matrix p = Matrix::Zero(dims.dim(), dims.dim());
  const int atoms_dim = dims.dim() / dims.fock_dim;
  for (int n = 0; n <= keep && n < dims.fock_dim; ++n)
    for (int j = 0; j < atoms_dim; ++j) p(n * atoms_dim + j, n * atoms_dim + j) = 1.0;
  return p;
}

cplx trace_prod(const Matrix& a, const Matrix& b) {  // tr(a b)
  return a.cwiseProduct(b.transpose()).sum();
}

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Every tracked moment's unclosed equation evaluated as tr{L(rho) o} on
// random banded states, against the dense generator.
CheckResult derivation_check(const std::string& model) {
  CheckResult r;
  r.name = model + " model derivation matches the dense generator";
  PhysicalParams p = PhysicalParams::reference();
  p.gamma12 = kTau * 4e5;
  const bool full = model == "full";
  MasterEquation st = static_frame(full ? full_model() : effective_model());
  ParamBindings binds = resolved_bindings(st, full ? bind_full(p) : bind_effective(p));

  SystemDims dims{8, 2, full ? 3 : 2};
  LiouvillianSpec spec{st.hamiltonian, concrete_channels(st, 2), dims, binds};
  const Matrix band = band_projector(dims, 4);

  auto sys = complete_moment_system(st, full ? default_seeds_full() : default_seeds_effective());
  std::vector<Matrix> m_obs, m_rhs;
  for (const auto& key : sys.table.keys()) {
    m_obs.push_back(to_matrix(key_expr(key), dims, binds));
    m_rhs.push_back(to_matrix(derive_moment_eq(st, key, AtomSum::concrete, 2), dims, binds));
  }

  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    Matrix rho = random_density(dims, 1000u + static_cast<unsigned>(s));
    rho = (band * rho * band).eval();
    rho /= rho.trace().real();
    Matrix lrho = liouvillian_apply(spec, rho, 0.0);
    double scale = 1.0;
    std::vector<cplx> lhs(m_obs.size()), rhs(m_obs.size());
    for (std::size_t i = 0; i < m_obs.size(); ++i) {
      lhs[i] = trace_prod(lrho, m_obs[i]);
      rhs[i] = trace_prod(rho, m_rhs[i]);
      scale = std::max(scale, std::abs(lhs[i]));
    }
    for (std::size_t i = 0; i < m_obs.size(); ++i)
      worst = std::max(worst, std::abs(lhs[i] - rhs[i]) / scale);
  }
  r.pass = worst < 1e-9;
  r.detail = "worst relative deviation " + fmt_g(worst) + " over " +
             std::to_string(sys.table.size()) + " moments (20 states, tol 1e-9)";
  return r;
}

CheckResult population_check() {
  CheckResult r;
  r.name = "level populations are conserved term by term";
  OperatorExpr sum;
  for (int l = 1; l <= 3; ++l)
    sum = sum + derive_moment_eq(static_frame(full_model()), {transition(1, l, l)},
                                 AtomSum::symmetric);
  r.pass = sum.is_zero();
  r.detail = r.pass ? "symbolic sum of the population equations is zero"
                    : "population sum has residual terms";
  return r;
}

double refined_peak_time(const std::vector<double>& ts, const std::vector<double>& ns) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < ns.size(); ++i)
    if (ns[i] > ns[k]) k = i;
  if (k == 0 || k + 1 == ns.size()) return ts[k];
  const double d1 = ns[k + 1] - ns[k - 1], d2 = ns[k + 1] - 2 * ns[k] + ns[k - 1];
  if (d2 >= 0) return ts[k];
  return ts[k] - 0.5 * (ts[k + 1] - ts[k]) * d1 / d2;
}

// Two atoms, scaled frequencies: the pulse peak time from the closed moment
// system against the dense master equation.  Scaled down so the dense solver
// resolves the optical phases in seconds of wall time.
CheckResult smalln_check() {
  CheckResult r;
  r.name = "two-atom pulse peak time matches the dense evolution";
  PhysicalParams p;
  p.w32 = kTau * 1e8;
  p.wd = p.w32 + kTau * 4e6;
  p.w31 = p.w32 + kTau * 2e7;
  p.wc = p.w31 + (p.wd - p.w32);  // two-photon resonance
  p.kappa = kTau * 1e6;
  p.g31 = kTau * 1e6;
  p.Omega = kTau * 2e5;
  p.gamma31 = kTau * 1e5;
  p.gamma12 = 0.0;
  p.n_atoms = 2.0;

  MasterEquation st = static_frame(full_model());
  ParamBindings binds = resolved_bindings(st, bind_full(p));
  SystemDims dims{6, 2, 3};
  LiouvillianSpec spec{st.hamiltonian, concrete_channels(st, 2), dims, binds};

  const double span = 1e-5;  // the two-atom pulse peaks near 1.6e-6 s
  ExactOptions opt;
  opt.n_out = 400;
  const auto snaps = evolve_exact(spec, vacuum_state(dims, {2, 2}), 0.0, span, opt);
  const std::vector<OperatorExpr> photon = {
      key_expr({boson_create(), boson_annihilate()})};
  std::vector<double> ts, ns;
  for (const auto& snap : snaps) {
    ts.push_back(snap.t);
    ns.push_back(moments(snap.rho, photon, dims, binds).front().real());
  }
  const double t_exact = refined_peak_time(ts, ns);

  Settings s;
  s.params = p;
  s.n_out = 400;
  auto cs = compile_system(s);
  const Trajectory tr = integrate(*cs, all_atoms_on_level(*cs, 2), 0.0, span, sim_config(s));
  const int slot = slot_of(*cs, {boson_create(), boson_annihilate()});
  std::vector<double> mts, mns;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    mts.push_back(tr.t[i]);
    mns.push_back(tr.y[i][slot]);
  }
  const double t_mf = refined_peak_time(mts, mns);

  const double rel = std::abs(t_mf - t_exact) / t_exact;
  r.pass = rel < 0.05;
  r.detail = "peak at " + fmt_g(t_exact) + " s exact vs " + fmt_g(t_mf) +
             " s closed (relative gap " + fmt_g(rel) + ", tol 0.05)";
  return r;
}

}  // namespace

ScenarioResult run_oracle_check() {
  const auto t0 = Clock::now();
  ScenarioResult res;
  res.name = "oracle-check";
  res.summary["name"] = "oracle-check";
  res.summary["kind"] = "oracle-check";
  res.summary["code_version"] = kCodeVersion;

  std::vector<CheckResult> checks;
  checks.push_back(derivation_check("full"));
  checks.push_back(derivation_check("effective"));
  checks.push_back(population_check());
  checks.push_back(smalln_check());

  json arr = json::array();
  bool all = true;
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    all = all && c.pass;
  }
  res.summary["checks"] = arr;
  res.summary["all_pass"] = all;
  res.summary["wall_time_s"] = seconds_since(t0);
  res.total_failure = !all;
  return res;
}

// ---------------------------------------------------------------------------
// Persistence

std::string format_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += table.columns[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw RunError("csv row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += fmt_g(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

WrittenFile write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunError("cannot write '" + path.string() + "'");
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.close();
  if (!out) throw RunError("short write on '" + path.string() + "'");
  return {path.string(), body.size(), hex64(fnv1a64(body.data(), body.size()))};
}

}  // namespace

std::vector<WrittenFile> emit_outputs(const ScenarioResult& result, const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  std::vector<WrittenFile> written;
  json outputs = json::array();
  for (const auto& [stem, table] : result.tables) {
    const WrittenFile w = write_file(fs::path(outdir) / (stem + ".csv"), format_csv(table));
    outputs.push_back({{"file", stem + ".csv"}, {"bytes", w.bytes}, {"fnv1a64", w.fnv1a}});
    written.push_back(w);
  }
  const std::string summary_name = result.name + "_summary.json";
  outputs.push_back({{"file", summary_name}});
  json summary = result.summary;
  summary["outputs"] = outputs;
  written.push_back(
      write_file(fs::path(outdir) / summary_name, summary.dump(2) + "\n"));
  return written;
}

}  // namespace raman::tools
