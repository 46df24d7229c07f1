#include "bellsim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "bellsim/error.hpp"

namespace bellsim::config {

namespace {

namespace pt = boost::property_tree;
using photonsim::HiddenVariableMode;

struct DoubleField {
  const char* section;
  const char* key;
  std::function<double&(Config&)> ref;
};

const std::vector<DoubleField>& double_fields() {
  static const std::vector<DoubleField> fields = {
      {"geometry", "link_distance_m", [](Config& c) -> double& { return c.scenario.geometry.link_distance; }},
      {"geometry", "alice_fiber_delay_s", [](Config& c) -> double& { return c.scenario.geometry.alice_fiber_delay; }},
      {"geometry", "bob_flight_delay_s", [](Config& c) -> double& { return c.scenario.geometry.bob_flight_delay; }},
      {"geometry", "alice_qrng_position_m", [](Config& c) -> double& { return c.scenario.geometry.alice_qrng_position; }},
      {"geometry", "alice_link_delay_s", [](Config& c) -> double& { return c.scenario.geometry.alice_link_delay; }},
      {"geometry", "alice_electronic_delay_s",
       [](Config& c) -> double& { return c.scenario.geometry.alice_electronic_delay; }},
      {"geometry", "bob_qrng_offset_m", [](Config& c) -> double& { return c.scenario.geometry.bob_qrng_offset; }},
      {"geometry", "bob_link_delay_s", [](Config& c) -> double& { return c.scenario.geometry.bob_link_delay; }},
      {"geometry", "bob_electronic_delay_s", [](Config& c) -> double& { return c.scenario.geometry.bob_electronic_delay; }},
      {"geometry", "choice_duration_s", [](Config& c) -> double& { return c.scenario.geometry.choice_duration; }},
      {"geometry", "slack_s", [](Config& c) -> double& { return c.scenario.geometry.slack; }},
      {"source", "pair_rate_hz", [](Config& c) -> double& { return c.scenario.pair_rate; }},
      {"source", "visibility_hv", [](Config& c) -> double& { return c.scenario.source_visibility[0]; }},
      {"source", "visibility_da", [](Config& c) -> double& { return c.scenario.source_visibility[1]; }},
      {"channels", "alice_attenuation_db", [](Config& c) -> double& { return c.scenario.alice_attenuation_db; }},
      {"channels", "bob_attenuation_db", [](Config& c) -> double& { return c.scenario.bob_attenuation_db; }},
      {"channels", "fiber_visibility", [](Config& c) -> double& { return c.scenario.fiber_visibility; }},
      {"channels", "fiber_visibility_end", [](Config& c) -> double& { return c.scenario.fiber_visibility_end; }},
      {"channels", "dark_rate_alice_hz", [](Config& c) -> double& { return c.scenario.dark_rate_alice; }},
      {"channels", "dark_rate_bob_hz", [](Config& c) -> double& { return c.scenario.dark_rate_bob; }},
      {"channels", "jitter_s", [](Config& c) -> double& { return c.scenario.jitter; }},
      {"channels", "bob_clock_drift", [](Config& c) -> double& { return c.scenario.bob_clock_drift; }},
      {"analyzer", "visibility", [](Config& c) -> double& { return c.scenario.analyzer_visibility; }},
      {"analyzer", "rise_time_s", [](Config& c) -> double& { return c.scenario.gating.rise_time; }},
      {"analyzer", "discard_window_s", [](Config& c) -> double& { return c.scenario.gating.discard_window; }},
      {"analyzer", "toggle_rate_hz", [](Config& c) -> double& { return c.scenario.gating.toggle_rate; }},
      {"analyzer", "alice_angle_0_deg", [](Config& c) -> double& { return c.scenario.alice_angles[0]; }},
      {"analyzer", "alice_angle_1_deg", [](Config& c) -> double& { return c.scenario.alice_angles[1]; }},
      {"analyzer", "bob_angle_0_deg", [](Config& c) -> double& { return c.scenario.bob_angles[0]; }},
      {"analyzer", "bob_angle_1_deg", [](Config& c) -> double& { return c.scenario.bob_angles[1]; }},
      {"analyzer", "bob_plate_deg", [](Config& c) -> double& { return c.scenario.bob_frame_plate; }},
      {"mode", "signal_speed_m_per_s", [](Config& c) -> double& { return c.scenario.signal_speed; }},
      {"analysis", "window_s", [](Config& c) -> double& { return c.analysis.match.window; }},
      {"analysis", "segment_s", [](Config& c) -> double& { return c.analysis.segment; }},
      {"analysis", "drift_block_s", [](Config& c) -> double& { return c.analysis.drift.block; }},
      {"analysis", "max_drift_s", [](Config& c) -> double& { return c.analysis.drift.max_drift; }},
      {"analysis", "offset_probe_s", [](Config& c) -> double& { return c.analysis.offset.probe_duration; }},
      {"run", "duration_s", [](Config& c) -> double& { return c.scenario.run_duration; }},
  };
  return fields;
}

// Keys handled outside the double table.
const std::map<std::string, std::set<std::string>>& special_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"scenario", {"name"}},
      {"geometry", {}},
      {"source", {}},
      {"channels", {"target_visibility"}},
      {"analyzer", {}},
      {"randomness",
       {"alice", "bob", "toggle_rate_hz", "alice_frequency_hz", "bob_frequency_hz", "alice_phase", "bob_phase",
        "alice_pattern", "bob_pattern"}},
      {"mode", {"hidden_variable", "strategy"}},
      {"analysis", {"window_convention", "drift_compensation", "offset_range_s", "offset_bin_s"}},
      {"run", {"seed"}},
  };
  return keys;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) fail(ErrorKind::kConfig, where + ": not a number: '" + text + "'");
  return v;
}

std::string source_kind(const randomness::SettingSource& s) {
  if (std::holds_alternative<randomness::QuantumToggle>(s.mode)) return "qrng";
  if (std::holds_alternative<randomness::Periodic>(s.mode)) return "periodic";
  return "pattern";
}

std::vector<std::uint8_t> expand_pattern(const std::string& pattern, std::size_t n, const std::string& where) {
  if (pattern.empty()) fail(ErrorKind::kConfig, where + ": predetermined source needs a non-empty pattern");
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) {
    const char ch = pattern[i % pattern.size()];
    if (ch != '0' && ch != '1') fail(ErrorKind::kConfig, where + ": pattern may contain only 0 and 1");
    bits[i] = static_cast<std::uint8_t>(ch - '0');
  }
  return bits;
}

void expand_patterns(Config& c) {
  const auto& s = c.scenario;
  const double horizon =
      s.run_duration + std::max(s.geometry.alice_fiber_delay, s.geometry.bob_flight_delay) * (1.0 + std::abs(s.bob_clock_drift)) +
      2e-3;
  const auto n = static_cast<std::size_t>(std::ceil(horizon * s.gating.toggle_rate)) + 1;
  if (std::holds_alternative<randomness::Predetermined>(c.scenario.alice_source.mode)) {
    c.scenario.alice_source.mode = randomness::Predetermined{expand_pattern(c.alice_pattern, n, "randomness.alice_pattern")};
  }
  if (std::holds_alternative<randomness::Predetermined>(c.scenario.bob_source.mode)) {
    c.scenario.bob_source.mode = randomness::Predetermined{expand_pattern(c.bob_pattern, n, "randomness.bob_pattern")};
  }
}

Config base_config() {
  Config c;
  c.scenario.name = "d";
  c.scenario.target_visibility = 0.838;
  return c;
}

}  // namespace

void set_duration(Config& c, double seconds) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) fail(ErrorKind::kConfig, "run duration must be >= 0");
  c.scenario.run_duration = seconds;
  expand_patterns(c);
}

Config parse_config(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::kConfig, origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }

  Config c = base_config();
  std::map<std::string, std::map<std::string, std::string>> values;
  for (const auto& [section, body] : tree) {
    if (!special_keys().count(section)) fail(ErrorKind::kConfig, origin + ": unknown section [" + section + "]");
    if (body.empty() && !body.data().empty()) fail(ErrorKind::kConfig, origin + ": key '" + section + "' outside a section");
    for (const auto& [key, node] : body) values[section][key] = node.get_value<std::string>();
  }
  auto where = [&](const std::string& s, const std::string& k) { return origin + ": " + s + "." + k; };

  std::set<std::pair<std::string, std::string>> consumed;
  for (const auto& f : double_fields()) {
    const auto sec = values.find(f.section);
    if (sec == values.end()) continue;
    const auto it = sec->second.find(f.key);
    if (it == sec->second.end()) continue;
    f.ref(c) = parse_double(it->second, where(f.section, f.key));
    consumed.emplace(f.section, f.key);
  }
  for (const auto& [section, kv] : values) {
    for (const auto& [key, value] : kv) {
      if (consumed.count({section, key})) continue;
      if (!special_keys().at(section).count(key)) fail(ErrorKind::kConfig, origin + ": unknown key " + section + "." + key);
    }
  }
  auto get = [&](const std::string& s, const std::string& k) -> const std::string* {
    const auto sec = values.find(s);
    if (sec == values.end()) return nullptr;
    const auto it = sec->second.find(k);
    return it == sec->second.end() ? nullptr : &it->second;
  };

  if (auto v = get("scenario", "name")) c.scenario.name = *v;
  if (auto v = get("channels", "target_visibility")) {
    if (*v == "none") c.scenario.target_visibility.reset();
    else c.scenario.target_visibility = parse_double(*v, where("channels", "target_visibility"));
  }

  double toggle = randomness::QuantumToggle{}.toggle_rate;
  if (auto v = get("randomness", "toggle_rate_hz")) toggle = parse_double(*v, where("randomness", "toggle_rate_hz"));
  auto make_source = [&](const std::string& side, std::string& pattern) {
    randomness::SettingSource src;
    src.sample_rate = c.scenario.gating.toggle_rate;
    const std::string kind = get("randomness", side) ? *get("randomness", side) : "qrng";
    if (kind == "qrng") {
      src.mode = randomness::QuantumToggle{toggle};
    } else if (kind == "periodic") {
      randomness::Periodic p;
      p.frequency = c.scenario.gating.toggle_rate;
      if (auto v = get("randomness", side + "_frequency_hz")) p.frequency = parse_double(*v, where("randomness", side + "_frequency_hz"));
      if (auto v = get("randomness", side + "_phase")) p.phase = parse_double(*v, where("randomness", side + "_phase"));
      src.mode = p;
    } else if (kind == "pattern") {
      const auto* v = get("randomness", side + "_pattern");
      if (!v) fail(ErrorKind::kConfig, where("randomness", side + "_pattern") + " is required for a pattern source");
      pattern = *v;
      src.mode = randomness::Predetermined{};
    } else {
      fail(ErrorKind::kConfig, where("randomness", side) + ": expected qrng, periodic or pattern, got '" + kind + "'");
    }
    return src;
  };
  c.scenario.alice_source = make_source("alice", c.alice_pattern);
  c.scenario.bob_source = make_source("bob", c.bob_pattern);
  c.scenario.geometry.setting_period = 1.0 / c.scenario.gating.toggle_rate;

  if (auto v = get("mode", "hidden_variable")) c.scenario.mode = photonsim::parse_mode(*v);
  if (auto v = get("mode", "strategy")) {
    if (v->size() != 4 || v->find_first_not_of("+-") != std::string::npos) {
      fail(ErrorKind::kConfig, where("mode", "strategy") + ": expected four of + or - (A0 A1 B0 B1)");
    }
    auto o = [&](int i) { return (*v)[static_cast<std::size_t>(i)] == '+' ? 1 : -1; };
    c.scenario.strategy = photonsim::LhvStrategy::deterministic({o(0), o(1)}, {o(2), o(3)});
  }

  if (auto v = get("analysis", "window_convention")) {
    if (*v == "total") c.analysis.match.convention = coincidence::WindowConvention::kTotalWidth;
    else if (*v == "half") c.analysis.match.convention = coincidence::WindowConvention::kHalfWidth;
    else fail(ErrorKind::kConfig, where("analysis", "window_convention") + ": expected total or half");
  }
  if (auto v = get("analysis", "drift_compensation")) {
    if (*v == "on") c.analysis.drift_compensation = true;
    else if (*v == "off") c.analysis.drift_compensation = false;
    else fail(ErrorKind::kConfig, where("analysis", "drift_compensation") + ": expected on or off");
  }
  if (auto v = get("analysis", "offset_range_s")) {
    const double r = parse_double(*v, where("analysis", "offset_range_s"));
    if (!(r > 0.0)) fail(ErrorKind::kConfig, where("analysis", "offset_range_s") + " must be > 0");
    c.analysis.offset.range_hi = std::llround(r * 1e12);
    c.analysis.offset.range_lo = -c.analysis.offset.range_hi;
  }
  if (auto v = get("analysis", "offset_bin_s")) {
    const double b = parse_double(*v, where("analysis", "offset_bin_s"));
    if (!(b >= 1e-12)) fail(ErrorKind::kConfig, where("analysis", "offset_bin_s") + " must be >= 1 ps");
    c.analysis.offset.bin_width = std::llround(b * 1e12);
  }
  if (auto v = get("run", "seed")) {
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), seed);
    if (ec != std::errc() || ptr != v->data() + v->size()) fail(ErrorKind::kConfig, where("run", "seed") + ": not an unsigned integer");
    c.seed = seed;
  }
  if (!(c.analysis.segment > 0.0)) fail(ErrorKind::kConfig, origin + ": analysis.segment_s must be > 0");

  expand_patterns(c);
  try {
    c.scenario.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, origin + ": " + e.what());
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kInput, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.filename().string());
}

std::string serialize(const Config& cfg) {
  Config c = cfg;  // the field accessors need a mutable object
  std::ostringstream os;
  std::string current;
  auto section = [&](const std::string& s) {
    if (s == current) return;
    os << (current.empty() ? "" : "\n") << "[" << s << "]\n";
    current = s;
  };
  section("scenario");
  os << "name = " << c.scenario.name << "\n";
  for (const auto& s : {"geometry", "source", "channels", "analyzer", "randomness", "mode", "analysis", "run"}) {
    section(s);
    for (const auto& f : double_fields()) {
      if (std::string(f.section) == s) os << f.key << " = " << fmt(f.ref(c)) << "\n";
    }
    const std::string sec = s;
    if (sec == "channels") {
      os << "target_visibility = " << (c.scenario.target_visibility ? fmt(*c.scenario.target_visibility) : "none") << "\n";
    } else if (sec == "randomness") {
      double toggle = randomness::QuantumToggle{}.toggle_rate;
      for (const auto* src : {&c.scenario.alice_source, &c.scenario.bob_source}) {
        if (auto q = std::get_if<randomness::QuantumToggle>(&src->mode)) toggle = q->toggle_rate;
      }
      os << "toggle_rate_hz = " << fmt(toggle) << "\n";
      auto side = [&](const std::string& name, const randomness::SettingSource& src, const std::string& pattern) {
        os << name << " = " << source_kind(src) << "\n";
        if (auto p = std::get_if<randomness::Periodic>(&src.mode)) {
          os << name << "_frequency_hz = " << fmt(p->frequency) << "\n" << name << "_phase = " << fmt(p->phase) << "\n";
        } else if (std::holds_alternative<randomness::Predetermined>(src.mode)) {
          os << name << "_pattern = " << pattern << "\n";
        }
      };
      side("alice", c.scenario.alice_source, c.alice_pattern);
      side("bob", c.scenario.bob_source, c.bob_pattern);
    } else if (sec == "mode") {
      os << "hidden_variable = " << photonsim::to_string(c.scenario.mode) << "\n";
      const auto& st = c.scenario.strategy;
      if (st.size() == 1) {
        auto sign = [](double p) { return p >= 0.5 ? '+' : '-'; };
        os << "strategy = " << sign(st.p_alice[0][0]) << sign(st.p_alice[0][1]) << sign(st.p_bob[0][0])
           << sign(st.p_bob[0][1]) << "\n";
      }
    } else if (sec == "analysis") {
      os << "window_convention = "
         << (c.analysis.match.convention == coincidence::WindowConvention::kTotalWidth ? "total" : "half") << "\n";
      os << "drift_compensation = " << (c.analysis.drift_compensation ? "on" : "off") << "\n";
      os << "offset_range_s = " << fmt(static_cast<double>(c.analysis.offset.range_hi) * 1e-12) << "\n";
      os << "offset_bin_s = " << fmt(static_cast<double>(c.analysis.offset.bin_width) * 1e-12) << "\n";
    } else if (sec == "run") {
      os << "seed = " << c.seed << "\n";
    }
  }
  return os.str();
}

std::string config_hash(const Config& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Scenario presets. Each lists only what differs from the defaults.
const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> p = {
      {"a",
       "# Choices in the past light cone of the emission; Bob's choice also\n"
       "# reaches Alice's measurement.\n"
       "[scenario]\nname = a\n\n"
       "[geometry]\nalice_electronic_delay_s = 100e-6\nbob_electronic_delay_s = 1000e-6\n\n"
       "[channels]\ntarget_visibility = 0.806\n\n"
       "[run]\nduration_s = 900\n"},
      {"b",
       "# Settings switched periodically by function generators.\n"
       "[scenario]\nname = b\n\n"
       "[channels]\ntarget_visibility = 0.79\n\n"
       "[randomness]\nalice = periodic\nbob = periodic\n\n"
       "[run]\nduration_s = 600\n"},
      {"c",
       "# Random choices in the future light cone of the emission; poor\n"
       "# transmission on the free-space link.\n"
       "[scenario]\nname = c\n\n"
       "[geometry]\nalice_electronic_delay_s = 0\nbob_electronic_delay_s = 0\n\n"
       "[channels]\nbob_attenuation_db = 37\ntarget_visibility = 0.79\n\n"
       "[run]\nduration_s = 300\n"},
      {"d",
       "# Choices space-like separated from the emission and from the\n"
       "# distant measurement.\n"
       "[scenario]\nname = d\n\n"
       "[channels]\ntarget_visibility = 0.838\n\n"
       "[run]\nduration_s = 2400\n"},
  };
  return p;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"a", "b", "c", "d"};
  return names;
}

std::string preset_text(const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) fail(ErrorKind::kConfig, "unknown scenario preset '" + name + "' (expected a, b, c or d)");
  return it->second;
}

Config preset(const std::string& name) { return parse_config(preset_text(name), "scenario " + name); }

}  // namespace bellsim::config
