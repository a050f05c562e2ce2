#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "harness.hpp"

using namespace raman;
using namespace raman::tools;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// order-one stand-in for the physical frequencies; keeps unit tests cheap
Settings toy_settings() {
  Settings s;
  s.params.wc = 10.0;
  s.params.w31 = 6.0;
  s.params.wd = 1.0;
  s.params.w32 = 5.0;
  s.params.kappa = 2.0;
  s.params.g31 = 0.5;
  s.params.Omega = 0.4;
  s.params.gamma31 = 0.3;
  s.params.gamma12 = 0.0;
  s.params.n_atoms = 100.0;
  s.n_out = 200;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("config text parses keys, comments, and line numbers") {
  const Config cfg = parse_config_text(
      "# comment line\n"
      "\n"
      "n_atoms = 250   # trailing comment\n"
      "kappa=3e6\n"
      "model = effective\n");
  REQUIRE(cfg.entries.size() == 3);
  CHECK(cfg.entries[0].key == "n_atoms");
  CHECK(cfg.entries[0].value == "250");
  CHECK(cfg.entries[0].line == 3);
  CHECK(cfg.entries[1].line == 4);
  CHECK(cfg.entries[2].value == "effective");

  CHECK_THROWS_WITH_AS(parse_config_text("n_atoms\n"), doctest::Contains("line 1"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("\nkappa = \n"), doctest::Contains("line 2"),
                       ConfigError);
}

TEST_CASE("unknown keys and malformed values report their line") {
  Settings s;
  CHECK_THROWS_WITH_AS(apply_config(s, parse_config_text("n_atoms = 10\nbogus = 1\n")),
                       doctest::Contains("line 2: unknown key 'bogus'"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config(s, parse_config_text("kappa = fast\n")),
                       doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config(s, parse_config_text("n_out = 2.5\n")),
                       doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config(s, parse_config_text("model = hybrid\n")),
                       doctest::Contains("model"), ConfigError);
}

TEST_CASE("frequencies accept the _2pi suffix as the same value") {
  Settings a, b;
  apply_config(a, parse_config_text("kappa = 11e6\nOmega = 5e6\n"));
  apply_config(b, parse_config_text("kappa = 11e6_2pi\nOmega = 5e6_2pi\n"));
  CHECK(a.params.kappa == b.params.kappa);
  CHECK(a.params.kappa == doctest::Approx(kTau * 11e6).epsilon(1e-15));
  CHECK(a.params.Omega == b.params.Omega);

  // the suffix is a frequency notation, not a general multiplier
  Settings c;
  CHECK_THROWS_WITH_AS(apply_config(c, parse_config_text("t_end = 1e-3_2pi\n")),
                       doctest::Contains("only valid on frequencies"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config(c, parse_config_text("n_atoms = 100_2pi\n")),
                       doctest::Contains("line 1"), ConfigError);
}

TEST_CASE("a minimal config overrides one knob and keeps the reference defaults") {
  Settings s;
  apply_config(s, parse_config_text("n_atoms = 250\n"));
  const PhysicalParams ref = PhysicalParams::reference();
  CHECK(s.params.n_atoms == 250.0);
  CHECK(s.params.kappa == ref.kappa);
  CHECK(s.params.g31 == ref.g31);
  CHECK(s.params.wd == ref.wd);
  CHECK(s.model == "full");

  apply_regime(s, "strong");
  CHECK(s.params.n_atoms == 1e6);
  CHECK_THROWS_AS(apply_regime(s, "weak"), ConfigError);
}

TEST_CASE("sweep values parse as a list and gamma12 resolves from the pumping fraction") {
  Settings s = toy_settings();
  apply_config(s, parse_config_text("sweep_values = 1, 2, 4\ngamma12_over_ngamma = 0.5\n"));
  REQUIRE(s.sweep_values == std::vector<double>{1.0, 2.0, 4.0});
  const double ngamma = s.params.n_atoms * derive_effective(s.params).Gamma;
  CHECK(resolved_gamma12(s) == doctest::Approx(0.5 * ngamma).epsilon(1e-12));

  // absolute rate wins when it comes later
  apply_config(s, parse_config_text("gamma12 = 2e3\n"));
  CHECK(resolved_gamma12(s) == doctest::Approx(kTau * 2e3).epsilon(1e-12));
}

TEST_CASE("csv formatting and the checksum are stable") {
  CsvTable t;
  t.columns = {"a", "b"};
  t.rows = {{1.0, 0.5}, {2.0, 0.25}};
  CHECK(format_csv(t) == "a,b\n1,0.5\n2,0.25\n");

  CHECK(fnv1a64("", 0) == 14695981039346656037ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);

  t.rows.push_back({3.0});
  CHECK_THROWS_AS(format_csv(t), RunError);
}

TEST_CASE("the scenario registry is fixed and discoverable") {
  const std::vector<std::string> expect = {"fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b",
                                           "fig3c", "fig3d", "fig4a", "fig4b", "fig4c", "fig4d",
                                           "figA1", "figA2", "figA3", "figA4"};
  const auto& list = scenarios();
  REQUIRE(list.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(list[i].name == expect[i]);
  REQUIRE(find_scenario("fig4c") != nullptr);
  CHECK(std::string(find_scenario("fig4c")->kind) == "sweep");
  CHECK(find_scenario("fig9z") == nullptr);
  CHECK_THROWS_AS(run_scenario("fig9z", {}, 1), RunError);
}

TEST_CASE("a pulse run reports metrics and echoes its configuration") {
  Settings s = toy_settings();
  s.t_end = 60.0;
  const ScenarioResult res = run_pulse(s, "toy");
  CHECK(res.summary["config"]["n_atoms"].get<double>() == 100.0);
  CHECK(res.summary["config"]["kappa"].get<double>() == doctest::Approx(2.0 / kTau));
  CHECK(res.summary["metrics"]["pulse"]["peak"].get<double>() > 0.0);
  REQUIRE(res.tables.size() == 1);
  const CsvTable& t = res.tables[0].second;
  CHECK(t.columns.front() == "t_s");
  CHECK(t.columns.back() == "m_bar");
  CHECK(t.rows.size() == 201);
}

TEST_CASE("emitted outputs are byte-reproducible and reload to the same metrics") {
  namespace fs = std::filesystem;
  Settings s = toy_settings();
  s.t_end = 60.0;
  s.n_out = 50;
  const fs::path dir1 = fs::temp_directory_path() / "raman_harness_a";
  const fs::path dir2 = fs::temp_directory_path() / "raman_harness_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  const ScenarioResult r1 = run_pulse(s, "toy");
  const ScenarioResult r2 = run_pulse(s, "toy");
  const auto f1 = emit_outputs(r1, dir1.string());
  const auto f2 = emit_outputs(r2, dir2.string());
  REQUIRE(f1.size() == 2);
  REQUIRE(f2.size() == 2);

  // csv bytes identical across independent runs
  CHECK(slurp(f1[0].path) == slurp(f2[0].path));
  CHECK(f1[0].fnv1a == f2[0].fnv1a);
  CHECK(f1[0].bytes > 0);

  // summary json reloads to the exact metric values
  const auto reloaded = nlohmann::ordered_json::parse(slurp(f1[1].path));
  CHECK(reloaded["metrics"]["pulse"]["peak"].get<double>() ==
        r1.summary["metrics"]["pulse"]["peak"].get<double>());
  CHECK(reloaded["outputs"].size() == 2);
  CHECK(reloaded["outputs"][0]["fnv1a64"].get<std::string>() == f1[0].fnv1a);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("spectrum sweeps pin the contract columns and record point failures") {
  Settings s = toy_settings();
  s.model = "effective";
  s.sweep_values = {0.0, 0.4, 0.8};  // first point has no pumping and must fail alone
  const ScenarioResult res = run_sweep(s, "gamma12_frac", "spectrum", 1, "toysweep");
  REQUIRE(res.tables.size() == 1);
  const CsvTable& t = res.tables[0].second;
  REQUIRE(t.columns.size() >= 4);
  CHECK(t.columns[0] == "gamma12");
  CHECK(t.columns[1] == "n_ss");
  CHECK(t.columns[2] == "shift");
  CHECK(t.columns[3] == "fwhm");
  CHECK(t.rows.size() == 2);
  CHECK(res.total_failure == false);
  REQUIRE(res.summary.contains("point_errors"));
  CHECK(res.summary["point_errors"].size() == 1);
  CHECK(res.summary["sweep"]["n_ok"].get<int>() == 2);

  const double ngamma = s.params.n_atoms * derive_effective(s.params).Gamma;
  CHECK(t.rows[0][0] == doctest::Approx(0.4 * ngamma / kTau).epsilon(1e-12));
  CHECK(t.rows[0][1] > 0.0);

  // all points failing is a total failure
  Settings bad = s;
  bad.sweep_values = {0.0};
  const ScenarioResult worst = run_sweep(bad, "gamma12_frac", "spectrum", 1, "toysweep");
  CHECK(worst.total_failure == true);

  CHECK_THROWS_AS(run_sweep(s, "tilt", "spectrum", 1, "x"), RunError);
  Settings none = s;
  none.sweep_values.clear();
  CHECK_THROWS_AS(run_sweep(none, "gamma12_frac", "spectrum", 1, "x"), RunError);
}

TEST_CASE("pulse sweeps fit power laws across the axis") {
  Settings s = toy_settings();
  s.sweep_values = {50.0, 100.0, 200.0, 400.0};
  const ScenarioResult res = run_sweep(s, "N", "pulse", 1, "toyn");
  REQUIRE(res.summary.contains("fits"));
  const auto& fits = res.summary["fits"];
  REQUIRE(fits.contains("peak_loglog"));
  const double slope = fits["peak_loglog"]["slope"].get<double>();
  CHECK(slope > 1.0);  // collective peak grows faster than linearly
  const CsvTable& t = res.tables[0].second;
  CHECK(t.columns[0] == "n_atoms");
  CHECK(t.rows.size() == 4);
}
