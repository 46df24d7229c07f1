#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bellsim/coincidence.hpp"
#include "bellsim/photonsim.hpp"

namespace bellsim::config {

struct AnalysisConfig {
  coincidence::MatchOptions match;
  double segment = 600.0;      // s; long simulations are split into runs of this length
  bool drift_compensation = true;
  coincidence::DriftOptions drift;
  coincidence::OffsetSearch offset;
};

struct Config {
  photonsim::ScenarioConfig scenario;
  AnalysisConfig analysis;
  std::uint64_t seed = 1;
  /// Repeating bit patterns for predetermined setting sources; expanded to
  /// cover the run by set_duration().
  std::string alice_pattern, bob_pattern;
};

/// Change the run length, re-expanding predetermined patterns.
void set_duration(Config& c, double seconds);

/// INI text with sections [scenario] [geometry] [source] [channels]
/// [analyzer] [randomness] [mode] [analysis] [run]. Unknown sections or
/// keys and malformed values throw Error(kConfig). Missing keys keep the
/// defaults of scenario d.
Config parse_config(const std::string& text, const std::string& origin = "config");
Config load_config(const std::filesystem::path& path);

/// Canonical INI form; parse_config(serialize(c)) reproduces c.
std::string serialize(const Config& c);

/// FNV-1a 64 of the canonical form, as 16 hex digits.
std::string config_hash(const Config& c);

/// Built-in scenarios "a", "b", "c", "d".
const std::vector<std::string>& preset_names();
std::string preset_text(const std::string& name);
Config preset(const std::string& name);

}  // namespace bellsim::config
