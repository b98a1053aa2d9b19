#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "dlcz/config.hpp"
#include "dlcz/error.hpp"

using namespace dlcz;
using namespace dlcz::config;

namespace {

template <typename F>
LocatedError located(F&& f) {
  try {
    f();
  } catch (const LocatedError& e) {
    return e;
  }
  FAIL("expected a located error");
  return LocatedError(ErrorCode::kConfig, "", 0, "");
}

}  // namespace

TEST_CASE("units are mandatory and converted to SI") {
  const RunConfig c = parse_config(R"(
[run]
scenario = rephase   # trailing comment
seed = 42
[sequence]
reversal_latency = 3 us
trial_period = 3300 ns
mot_load = 15 ms
repetition_rate = 0.059 kHz
[ensemble]
temperature = 180 uK
sigma_z = 0.1 cm
[gradient]
amplitude = 17 G/cm
zeeman_coefficient = 14 GHz/T
[geometry]
crossing_angle = 0.95 deg
[source]
p_w = 1 %
[classes]
weights = 0.85, 0.15
zeeman_scales = 1, 0.5
beat_frequencies = 0, 50 kHz
[scan]
readout_times = 20.5:0.01:20.53 us, 30 us
)");
  CHECK(c.scenario == Scenario::kRephase);
  CHECK(c.seed == 42);
  CHECK(c.sequence.reversal_latency == 3e-6);
  CHECK(c.sequence.trial_period == 3.3e-6);
  CHECK(c.sequence.mot_load == 15e-3);
  CHECK(c.sequence.repetition_rate == doctest::Approx(59.0));
  CHECK(c.physics.ensemble.temperature == 180e-6);
  CHECK(c.physics.ensemble.cloud_sigma.z() == 1e-3);
  CHECK(c.physics.gradient_amplitude == doctest::Approx(0.17));
  CHECK(c.physics.zeeman_coefficient == doctest::Approx(2.0 * 3.14159265358979323846 * 14e9));
  CHECK(c.physics.crossing_angle == doctest::Approx(0.95 * 3.14159265358979323846 / 180.0));
  CHECK(c.stats.p_w == 0.01);
  CHECK(c.class_beat_frequencies[1] == doctest::Approx(2.0 * 3.14159265358979323846 * 50e3));
  REQUIRE(c.readout_times.size() == 5);
  CHECK(c.readout_times[3] == doctest::Approx(20.53e-6));
  CHECK(c.readout_times[4] == 30e-6);
}

TEST_CASE("diagnostics name line and field") {
  SUBCASE("missing unit") {
    const LocatedError e = located([] { parse_config("[sequence]\n\nreversal_latency = 3\n", "a.cfg"); });
    CHECK(e.code() == ErrorCode::kConfig);
    CHECK(e.line() == 3);
    CHECK(e.field() == "sequence.reversal_latency");
    CHECK(std::string(e.what()).find("a.cfg:3") != std::string::npos);
  }
  SUBCASE("wrong unit") {
    const LocatedError e = located([] { parse_config("[sequence]\nreversal_latency = 3 kHz\n"); });
    CHECK(e.field() == "sequence.reversal_latency");
  }
  SUBCASE("unknown field") {
    const LocatedError e = located([] { parse_config("[sequence]\nspeed = 3 us\n"); });
    CHECK(e.field() == "sequence.speed");
    CHECK(e.line() == 2);
  }
  SUBCASE("duplicate") {
    const LocatedError e = located([] { parse_config("[source]\np_w = 1 %\np_w = 2 %\n"); });
    CHECK(e.line() == 3);
  }
  SUBCASE("negative temperature") {
    const LocatedError e = located([] { parse_config("[ensemble]\ntemperature = -5 uK\n"); });
    CHECK(e.field() == "ensemble.temperature");
  }
  SUBCASE("bad choice") {
    const LocatedError e = located([] { parse_config("[run]\nscenario = echo\n"); });
    CHECK(e.field() == "run.scenario");
  }
  SUBCASE("cross-field validation") {
    RunConfig c;
    c.readout_times = {20e-6};
    c.class_weights = {0.5, 0.4};
    c.class_zeeman_scales = {1, 1};
    c.class_beat_frequencies = {0, 0};
    const LocatedError e = located([&] { c.validate(); });
    CHECK(e.field() == "classes.weights");
  }
}

TEST_CASE("canonical text round trip") {
  RunConfig c = parse_config(R"(
[run]
scenario = multiplex
[ensemble]
temperature = 180.46 uK
[gradient]
coil_tau = 8.439 us
peak_jitter = 50.5 ns
[scan]
readout_times = 5:1:15 us, 20.84 us
[multiplex]
write_offsets = 0, 600 ns
noise_scale = 1.75
)");
  const std::string text = to_text(c);
  const RunConfig back = parse_config(text);
  CHECK(to_text(back) == text);
  CHECK(back.physics.coil_tau == c.physics.coil_tau);
  CHECK(back.readout_times == c.readout_times);
  CHECK(back.multiplex_noise_scale == 1.75);
}

TEST_CASE("environment overrides and field access") {
  RunConfig c;
  setenv("DLCZ_SOURCE__P_W", "0.28 %", 1);
  setenv("DLCZ_RUN__SEED", "99", 1);
  apply_environment(c);
  unsetenv("DLCZ_SOURCE__P_W");
  unsetenv("DLCZ_RUN__SEED");
  CHECK(c.stats.p_w == doctest::Approx(0.0028));
  CHECK(c.seed == 99);
  set_field(c, "sequence.readout_delay", "21 us");
  CHECK(get_field(c, "sequence.readout_delay") == "2.1e-05 s");
  CHECK(is_numeric_field("source.p_w"));
  CHECK_FALSE(is_numeric_field("run.scenario"));
  CHECK_FALSE(is_numeric_field("scan.readout_times"));
  CHECK_THROWS_AS(get_field(c, "nope.field"), LocatedError);
}

TEST_CASE("help lists every field with its unit") {
  const std::string help = schema_help();
  for (const FieldInfo& f : schema()) {
    const auto pos = help.find(f.path);
    REQUIRE_MESSAGE(pos != std::string::npos, f.path);
    const std::string line = help.substr(pos, help.find('\n', pos) - pos);
    CHECK_MESSAGE(line.find('[') != std::string::npos, f.path);
    if (!f.unit.empty()) CHECK_MESSAGE(line.find(f.unit) != std::string::npos, f.path);
  }
}

TEST_CASE("quantities") {
  CHECK(parse_quantity("20.84 us", Dimension::kTime) == 20.84e-6);
  CHECK(parse_quantity("60 %", Dimension::kNone) == 0.6);
  CHECK_THROWS_AS(parse_quantity("20.84", Dimension::kTime), Error);
}
