#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "harness.hpp"

namespace {

using namespace raman::tools;

struct CommonArgs {
  std::string scenario;
  std::string model;
  std::string regime;
  std::string config_path;
  std::string out = "out";
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_scenario = true) {
  if (with_scenario)
    cmd->add_option("--scenario", a.scenario, "registered scenario name (see list-scenarios)");
  cmd->add_option("--model", a.model, "full or effective")
      ->check(CLI::IsMember({"full", "effective"}));
  cmd->add_option("--regime", a.regime, "crossover (N = 1e4) or strong (N = 1e6)")
      ->check(CLI::IsMember({"crossover", "strong"}));
  cmd->add_option("--config", a.config_path, "key = value config file");
  cmd->add_option("--out", a.out, "output directory (default: out)");
  cmd->add_option("--threads", a.threads, "worker threads for sweep points")
      ->check(CLI::PositiveNumber);
}

Settings assemble(const CommonArgs& a) {
  Settings s;
  if (!a.regime.empty()) apply_regime(s, a.regime);
  if (!a.model.empty()) s.model = a.model;
  if (!a.config_path.empty()) apply_config(s, load_config(a.config_path));
  return s;
}

Config overrides(const CommonArgs& a) {
  Config cfg;
  if (!a.config_path.empty()) cfg = load_config(a.config_path);
  if (!a.model.empty()) cfg.entries.push_back({"model", a.model, 0});
  if (!a.regime.empty())
    cfg.entries.push_back({"n_atoms", a.regime == "strong" ? "1e6" : "1e4", 0});
  return cfg;
}

int finish(const ScenarioResult& res, const std::string& outdir) {
  const auto files = emit_outputs(res, outdir);
  for (const auto& f : files)
    std::printf("wrote %s (%llu bytes, fnv1a64 %s)\n", f.path.c_str(),
                static_cast<unsigned long long>(f.bytes), f.fnv1a.c_str());
  if (res.total_failure) {
    std::fprintf(stderr, "error: every point of '%s' failed\n", res.name.c_str());
    return 1;
  }
  return 0;
}

int run_kind(const CommonArgs& a, const std::string& kind, const std::string& axis,
             const std::string& metric) {
  if (!a.scenario.empty()) {
    const ScenarioInfo* info = find_scenario(a.scenario);
    if (!info) throw ConfigError("unknown scenario '" + a.scenario + "'");
    if (kind != info->kind)
      throw ConfigError("scenario '" + a.scenario + "' is a " + std::string(info->kind) +
                        " run; use the matching subcommand");
    return finish(run_scenario(a.scenario, overrides(a), a.threads), a.out);
  }
  const Settings s = assemble(a);
  if (kind == "pulse") return finish(run_pulse(s), a.out);
  if (kind == "steady") return finish(run_steady(s), a.out);
  if (kind == "spectrum") return finish(run_spectrum(s), a.out);
  return finish(run_sweep(s, axis, metric, a.threads), a.out);
}

int run_oracle(const CommonArgs& a) {
  const ScenarioResult res = run_oracle_check();
  for (const auto& c : res.summary["checks"]) {
    std::printf("[%s] %s: %s\n", c["pass"].get<bool>() ? "PASS" : "FAIL",
                c["name"].get<std::string>().c_str(), c["detail"].get<std::string>().c_str());
  }
  emit_outputs(res, a.out);
  return res.total_failure ? 1 : 0;
}

int list_scenarios() {
  std::printf("%-8s %-9s %s\n", "name", "kind", "description");
  for (const auto& s : scenarios()) std::printf("%-8s %-9s %s\n", s.name, s.kind, s.description);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cavity superradiance simulator: closed moment equations, pulse and"
               " stationary studies, emission spectra, dense-solver cross checks"};
  app.require_subcommand(1);

  CommonArgs pulse_args, sweep_args, steady_args, spectrum_args, oracle_args;
  std::string axis, metric = "pulse";

  add_common(app.add_subcommand("pulse", "integrate a superradiant pulse"), pulse_args);
  auto* sweep = app.add_subcommand("sweep", "run one metric over a parameter grid");
  add_common(sweep, sweep_args);
  sweep->add_option("--axis", axis, "N, Omega, Delta, gamma12, or gamma12_frac");
  sweep->add_option("--metric", metric, "pulse, steady, or spectrum")
      ->check(CLI::IsMember({"pulse", "steady", "spectrum"}));
  add_common(app.add_subcommand("steady", "relax to the pumped stationary state"), steady_args);
  add_common(app.add_subcommand("spectrum", "stationary emission spectrum"), spectrum_args);
  auto* oracle = app.add_subcommand("oracle-check", "derivation checks against the dense solver");
  oracle->add_option("--out", oracle_args.out, "output directory (default: out)");
  app.add_subcommand("list-scenarios", "print the registered scenario table");

  try {
    app.parse(argc, argv);
    if (app.got_subcommand("pulse")) return run_kind(pulse_args, "pulse", "", "");
    if (app.got_subcommand("sweep")) {
      if (sweep_args.scenario.empty() && axis.empty())
        throw ConfigError("sweep needs --scenario or --axis");
      return run_kind(sweep_args, "sweep", axis, metric);
    }
    if (app.got_subcommand("steady")) return run_kind(steady_args, "steady", "", "");
    if (app.got_subcommand("spectrum")) return run_kind(spectrum_args, "spectrum", "", "");
    if (app.got_subcommand("oracle-check")) return run_oracle(oracle_args);
    if (app.got_subcommand("list-scenarios")) return list_scenarios();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
