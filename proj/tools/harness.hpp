#pragma once
// Scenario library, configuration, and result persistence behind the CLI.
//
// A scenario bundles a model choice, physical parameters, and a run kind
// (pulse, sweep, spectrum) into a named, deterministic computation.  The
// registered names reproduce the shipped study set; ad-hoc runs assemble
// the same Settings from the command line and a key/value config file.
//
// Results stay in memory (tables plus a JSON summary) until emit_outputs
// writes them: one CSV per table, plus <name>_summary.json carrying the
// resolved configuration, metrics, fits, units, and a checksum per file.
// CSV bytes are reproducible run to run; wall time lives only in the JSON.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "raman/models.hpp"

namespace raman::tools {

inline constexpr const char* kCodeVersion = "1.0.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration.  Structured text, one `key = value` per line, `#` comments.
// Frequencies and rates are entered in Hz; the optional `_2pi` value suffix
// mirrors source notation that quotes angular values as 2pi x (value in Hz),
// so `11e6` and `11e6_2pi` denote the same physical frequency.  Counts and
// tolerances are dimensionless; times are seconds.

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Config {
  std::vector<ConfigEntry> entries;
};

Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);

// Run settings: reference parameters plus run shape.  Angular units inside.
struct Settings {
  std::string model = "full";  // full | effective
  PhysicalParams params = PhysicalParams::reference();
  double gamma12_over_ngamma = -1.0;  // >= 0: pumping as a fraction of N Gamma
  double t_end = 0.0;                 // pulse span in s; 0: auto from N Gamma
  int n_out = 1000;
  double rtol = 1e-8;
  double atol = 1e-10;
  double observation = 0.0;  // spectrum transform bound in s; 0: unlimited
  std::vector<double> sweep_values;
};

// Applies config entries on top of `s`; unknown keys and malformed values
// throw ConfigError with the line number.
void apply_config(Settings& s, const Config& cfg);

// crossover: N = 1e4 (reference); strong: N = 1e6.
void apply_regime(Settings& s, const std::string& regime);

// Pumping rate in rad/s after resolving gamma12_over_ngamma.
double resolved_gamma12(const Settings& s);

// ---------------------------------------------------------------------------
// Results

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ScenarioResult {
  std::string name;
  nlohmann::ordered_json summary;
  std::vector<std::pair<std::string, CsvTable>> tables;  // file stem -> table
  bool total_failure = false;
};

// ---------------------------------------------------------------------------
// Scenario registry; names map one to one onto the shipped study set.

struct ScenarioInfo {
  const char* name;
  const char* kind;  // pulse | sweep | spectrum
  const char* description;
};

const std::vector<ScenarioInfo>& scenarios();
const ScenarioInfo* find_scenario(const std::string& name);

// Builds the scenario's pinned settings, applies user overrides, runs it.
ScenarioResult run_scenario(const std::string& name, const Config& overrides, int threads);

// Ad-hoc runs from fully assembled settings.
ScenarioResult run_pulse(const Settings& s, const std::string& id = "pulse");
ScenarioResult run_steady(const Settings& s, const std::string& id = "steady");
ScenarioResult run_spectrum(const Settings& s, const std::string& id = "spectrum");
ScenarioResult run_sweep(const Settings& s, const std::string& axis, const std::string& metric,
                         int threads, const std::string& id = "sweep");

// Derivation and closure checks against the dense reference solver; one
// summary line per check in the result, total_failure when any fails.
ScenarioResult run_oracle_check();

// ---------------------------------------------------------------------------
// Persistence

struct WrittenFile {
  std::string path;
  std::uint64_t bytes = 0;
  std::string fnv1a;  // 64-bit hex
};

std::string format_csv(const CsvTable& table);
std::uint64_t fnv1a64(const void* data, std::size_t n);

// Writes every table as <stem>.csv plus <name>_summary.json into `outdir`
// (created if missing) and returns the file list, summary last.
std::vector<WrittenFile> emit_outputs(const ScenarioResult& result, const std::string& outdir);

}  // namespace raman::tools
