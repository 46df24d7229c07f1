#include <filesystem>
#include <string>

#include "bellsim/config.hpp"
#include "bellsim/error.hpp"
#include "doctest.h"

using namespace bellsim;
using namespace bellsim::config;

namespace {
ErrorKind kind_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInput;  // no error at all
}
}  // namespace

TEST_SUITE("config") {
  TEST_CASE("empty text gives the defaults") {
    auto c = parse_config("");
    CHECK(c.scenario.pair_rate == 2.5e6);
    CHECK(c.scenario.bob_attenuation_db == 35.0);
    CHECK(c.analysis.match.window == 1.5e-9);
    CHECK(c.analysis.match.convention == coincidence::WindowConvention::kTotalWidth);
  }

  TEST_CASE("round trip and hash") {
    for (const auto& name : preset_names()) {
      auto c = preset(name);
      auto text = serialize(c);
      auto back = parse_config(text);
      CHECK(serialize(back) == text);
      CHECK(config_hash(back) == config_hash(c));
      CHECK(config_hash(c).size() == 16);
    }
    CHECK(config_hash(preset("a")) != config_hash(preset("d")));
    auto c = preset("d");
    auto h = config_hash(c);
    c.seed = 99;
    CHECK(config_hash(c) != h);
  }

  TEST_CASE("values are parsed") {
    auto c = parse_config(
        "[channels]\nbob_attenuation_db = 37\ntarget_visibility = none\n"
        "[analysis]\nwindow_s = 3e-9\nwindow_convention = half\ndrift_compensation = off\n"
        "[randomness]\nalice = pattern\nalice_pattern = 0110\n"
        "[mode]\nhidden_variable = local\nstrategy = +++-\n"
        "[run]\nduration_s = 1e-5\nseed = 12\n");
    CHECK(c.scenario.bob_attenuation_db == 37.0);
    CHECK_FALSE(c.scenario.target_visibility.has_value());
    CHECK(c.analysis.match.window == 3e-9);
    CHECK(c.analysis.match.convention == coincidence::WindowConvention::kHalfWidth);
    CHECK_FALSE(c.analysis.drift_compensation);
    CHECK_FALSE(c.scenario.alice_source.stochastic());
    CHECK(c.scenario.mode == photonsim::HiddenVariableMode::kLocalDeterministic);
    CHECK(c.scenario.strategy.chsh() == doctest::Approx(2.0));
    CHECK(c.seed == 12);
  }

  TEST_CASE("bad input is rejected") {
    CHECK(kind_of("[nonsense]\nx = 1\n") == ErrorKind::kConfig);
    CHECK(kind_of("[channels]\nbogus_key = 1\n") == ErrorKind::kConfig);
    CHECK(kind_of("[channels]\nbob_attenuation_db = loud\n") == ErrorKind::kConfig);
    CHECK(kind_of("[channels]\nbob_attenuation_db = -3\n") == ErrorKind::kConfig);
    CHECK(kind_of("[analysis]\nwindow_convention = wide\n") == ErrorKind::kConfig);
    CHECK(kind_of("[mode]\nhidden_variable = magic\n") == ErrorKind::kConfig);
    CHECK(kind_of("[channels\n") == ErrorKind::kConfig);
    CHECK_THROWS_AS(preset("e"), Error);
  }

  TEST_CASE("preset verdicts") {
    auto verdict = [](const std::string& n) { return photonsim::scenario_verdict(preset(n).scenario); };
    auto a = verdict("a"), b = verdict("b"), c = verdict("c"), d = verdict("d");
    CHECK_FALSE(a.locality_closed);
    CHECK_FALSE(a.freedom_closed);
    CHECK_FALSE(b.locality_closed);
    CHECK_FALSE(b.freedom_closed);
    CHECK_FALSE(b.settings_stochastic);
    CHECK(c.locality_closed);
    CHECK_FALSE(c.freedom_closed);
    CHECK(d.locality_closed);
    CHECK(d.freedom_closed);
  }

  TEST_CASE("patterns follow the run length") {
    auto c = parse_config("[randomness]\nbob = pattern\nbob_pattern = 10\n[run]\nduration_s = 1e-3\n");
    auto s = randomness::sample_settings(c.scenario.bob_source, 1e-3, 1);
    CHECK(s.bit(0) == 1);
    CHECK(s.bit(1) == 0);
    set_duration(c, 2.0);
    CHECK(c.scenario.run_duration == 2.0);
    CHECK_NOTHROW(randomness::sample_settings(c.scenario.bob_source, 2.0, 1));
  }

  TEST_CASE("shipped scenario files match the built-in presets") {
    for (const auto& name : preset_names()) {
      const auto file = load_config(std::filesystem::path(BELLSIM_SOURCE_DIR) / "scenarios" / (name + ".cfg"));
      CHECK_MESSAGE(config_hash(file) == config_hash(preset(name)), name);
    }
  }
}
