#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dlcz/error.hpp"
#include "dlcz/scenario.hpp"

using namespace dlcz;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "dlcz_test_scenario" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

config::RunConfig small(config::Scenario s) {
  config::RunConfig c;
  c.scenario = s;
  c.seed = 11;
  c.target_heralds = 300;
  c.physics.ensemble.atom_count = 500;
  c.stats.p_w = 0.02;
  c.readout_times = {1e-6, 6e-6, 12e-6, 20.5e-6, 20.6e-6, 20.7e-6, 20.8e-6, 20.9e-6, 21e-6, 21.1e-6};
  c.snr_background = {1e-6, 13e-6};
  c.snr_peak = {20.4e-6, 21.1e-6};
  c.alpha_p_w = {0.02, 0.03};
  c.alpha_heralds = 300;
  c.stats.fock_cutoff = 12;
  c.stats.noise.kappa = 0.5;
  return c;
}

}  // namespace

TEST_CASE("every scenario writes its artifacts and a manifest") {
  for (config::Scenario s : {config::Scenario::kStandard, config::Scenario::kRephase, config::Scenario::kMultiplex,
                             config::Scenario::kAlphaScan}) {
    CAPTURE(config::scenario_name(s));
    config::RunConfig c = small(s);
    const fs::path out = scratch(config::scenario_name(s));
    const scenario::ScenarioResult r = scenario::run_scenario(c, out);
    CHECK(fs::exists(out / "manifest.txt"));
    CHECK(fs::exists(out / "metrics.txt"));
    for (const fs::path& f : r.files) CHECK_MESSAGE(fs::exists(out / f), f.string());
    CHECK(!r.metrics.empty());

    // the manifest is itself a config and reproduces every byte
    const config::RunConfig again = config::load_config(out / "manifest.txt");
    CHECK(config::to_text(again) == config::to_text(c));
    const fs::path out2 = scratch(std::string(config::scenario_name(s)) + "_again");
    const scenario::ScenarioResult r2 = scenario::run_scenario(again, out2);
    REQUIRE(r2.files == r.files);
    for (const fs::path& f : r.files) CHECK_MESSAGE(slurp(out / f) == slurp(out2 / f), f.string());
  }
}

TEST_CASE("rephase metrics") {
  const config::RunConfig c = small(config::Scenario::kRephase);
  const scenario::ScenarioResult r = scenario::run_scenario(c, scratch("rephase_metrics"));
  REQUIRE(r.find("peak_time"));
  REQUIRE(r.find("predicted_peak_time"));
  CHECK(std::abs(r.find("peak_time")->value - r.find("predicted_peak_time")->value) < 100e-9);
  CHECK(r.find("snr")->value > 1.0);
  CHECK_FALSE(r.find("no_such_metric"));
}

TEST_CASE("manifest header") {
  const config::RunConfig c = small(config::Scenario::kStandard);
  const std::string m = scenario::manifest_text(c);
  CHECK(m.rfind("# dlczsim manifest", 0) == 0);
  char hash[40];
  std::snprintf(hash, sizeof hash, "fnv1a64:%016llx", static_cast<unsigned long long>(scenario::config_hash(c)));
  CHECK(m.find(hash) != std::string::npos);
  config::RunConfig d = c;
  d.seed = 12;
  CHECK(scenario::config_hash(d) != scenario::config_hash(c));
}

TEST_CASE("a one-point sweep equals a plain run") {
  const config::RunConfig c = small(config::Scenario::kStandard);
  const fs::path out = scratch("sweep");
  const scenario::SweepResult s = scenario::run_sweep(c, "source.p_w", {"2 %"}, out);
  REQUIRE(s.runs.size() == 1);
  CHECK(s.values.front() == "0.02");
  const fs::path plain_dir = scratch("sweep_plain");
  const scenario::ScenarioResult plain = scenario::run_scenario(c, plain_dir);
  for (const fs::path& f : plain.files) {
    if (f == "manifest.txt") continue;
    CHECK_MESSAGE(slurp(out / "sweep_000" / f) == slurp(plain_dir / f), f.string());
  }
  const std::string summary = slurp(out / "summary.csv");
  CHECK(summary.rfind("index,source.p_w,", 0) == 0);
  CHECK_THROWS_AS(scenario::run_sweep(c, "run.scenario", {"standard"}, scratch("bad")), LocatedError);
}
