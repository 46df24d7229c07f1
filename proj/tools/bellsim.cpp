// bellsim command line: verdict, run, analyze, tomo, table2.
//
// Exit codes: 0 success, 1 a loophole verdict is open (verdict only),
// 2 input/config/data error, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bellsim/coincidence.hpp"
#include "bellsim/config.hpp"
#include "bellsim/error.hpp"
#include "bellsim/kernels.hpp"
#include "bellsim/photonsim.hpp"
#include "bellsim/pipeline.hpp"
#include "bellsim/spacetime.hpp"
#include "bellsim/timetag.hpp"
#include "bellsim/tomography.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bellsim;

namespace {

constexpr int kExitOpen = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_path;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::optional<double> window;
  std::string out = ".";
};

config::Config load(const Common& c) {
  config::Config cfg;
  if (!c.config_path.empty()) {
    cfg = config::load_config(c.config_path);
  } else {
    cfg = config::preset(c.scenario.empty() ? "d" : c.scenario);
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.duration) config::set_duration(cfg, *c.duration);
  if (c.window) cfg.analysis.match.window = *c.window;
  return cfg;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json verdict_json(const spacetime::LoopholeVerdict& v) {
  return {{"locality_closed", v.locality_closed},
          {"freedom_closed", v.freedom_closed},
          {"settings_stochastic", v.settings_stochastic}};
}

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// Manifest and plain-text sidecar, written last and atomically.
void write_manifest(const fs::path& dir, const std::string& command, json body, const Timer& timer,
                    const std::string& started) {
  body["command"] = command;
  body["kernels"] = kernels::to_string(kernels::active_isa());
  body["timing"] = {{"started_utc", started}, {"wall_seconds", timer.seconds()}};
  write_file_atomic(dir / "manifest.json", body.dump(2) + "\n");

  std::ostringstream meta;
  meta << "command=" << command << "\n";
  if (body.contains("config_hash")) meta << "config_hash=" << body["config_hash"].get<std::string>() << "\n";
  if (body.contains("seed")) meta << "seed=" << body["seed"].get<std::uint64_t>() << "\n";
  if (body.contains("verdict")) {
    meta << "locality=" << (body["verdict"]["locality_closed"].get<bool>() ? "closed" : "open") << "\n";
    meta << "freedom_of_choice=" << (body["verdict"]["freedom_closed"].get<bool>() ? "closed" : "open") << "\n";
  }
  meta << "started_utc=" << started << "\n";
  write_file_atomic(dir / "manifest.meta", meta.str());
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kInput, "cannot create output directory " + out + ": " + ec.message());
  return dir;
}

TagStream read_tags(const fs::path& p) {
  return p.extension() == ".csv" ? read_tag_csv(p) : read_tag_file(p);
}

int cmd_verdict(const Common& c, bool deterministic) {
  auto cfg = load(c);
  if (deterministic) {
    cfg.scenario.alice_source.mode = randomness::Periodic{cfg.scenario.gating.toggle_rate, 0.0};
    cfg.scenario.bob_source.mode = randomness::Periodic{cfg.scenario.gating.toggle_rate, 0.0};
  }
  const auto events = spacetime::build_scenario_events(cfg.scenario.geometry);
  const auto v = photonsim::scenario_verdict(cfg.scenario);
  std::cout << "scenario " << cfg.scenario.name << "\n\n" << spacetime::format_report(events, v);
  return v.locality_closed && v.freedom_closed ? 0 : kExitOpen;
}

int cmd_run(const Common& c, bool no_csv) {
  const Timer timer;
  const auto started = utc_now();
  const auto cfg = load(c);
  const auto dir = prepare_out(c.out);
  const auto result = photonsim::run_experiment(cfg.scenario, cfg.seed);

  std::vector<std::string> outputs;
  auto emit = [&](const std::string& name, auto&& writer) {
    writer(dir / name);
    outputs.push_back((dir / name).string());
  };
  emit("alice.tags", [&](const fs::path& p) { write_tag_file(result.alice, p); });
  emit("bob.tags", [&](const fs::path& p) { write_tag_file(result.bob, p); });
  if (!no_csv) {
    emit("alice.csv", [&](const fs::path& p) { write_tag_csv(result.alice, p); });
    emit("bob.csv", [&](const fs::path& p) { write_tag_csv(result.bob, p); });
  }
  emit("config.ini", [&](const fs::path& p) { write_file_atomic(p, config::serialize(cfg)); });

  const auto& s = result.stats;
  json body = {{"config_hash", config::config_hash(cfg)},
               {"seed", cfg.seed},
               {"scenario", cfg.scenario.name},
               {"duration_s", cfg.scenario.run_duration},
               {"verdict", verdict_json(result.verdict)},
               {"outputs", outputs},
               {"stats",
                {{"alice_tags", result.alice.size()},
                 {"bob_tags", result.bob.size()},
                 {"joint_pairs", s.joint_pairs},
                 {"dark_alice", s.dark_alice},
                 {"dark_bob", s.dark_bob},
                 {"discarded_fraction", s.discarded_fraction()},
                 {"dark_rate_bob_hz", s.dark_rate_bob}}},
               {"warnings", result.warnings}};
  write_manifest(dir, "run", body, timer, started);

  std::cout << "scenario " << cfg.scenario.name << ", " << cfg.scenario.run_duration << " s, seed " << cfg.seed << "\n"
            << "alice: " << result.alice.size() << " tags, bob: " << result.bob.size() << " tags\n"
            << "gated out: " << std::fixed << std::setprecision(4) << s.discarded_fraction() << "\n"
            << "locality: " << (result.verdict.locality_closed ? "CLOSED" : "OPEN")
            << ", freedom-of-choice: " << (result.verdict.freedom_closed ? "CLOSED" : "OPEN") << "\n"
            << "wrote " << dir.string() << "\n";
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_analyze(const Common& c, const std::string& alice_path, const std::string& bob_path, bool half_width,
                double hist_range, bool subtract) {
  const Timer timer;
  const auto started = utc_now();
  // A run directory carries its config.ini; use it when no config is given.
  const auto sibling = fs::path(alice_path).parent_path() / "config.ini";
  std::optional<config::Config> run_cfg;
  if (!c.config_path.empty() || !c.scenario.empty()) {
    run_cfg = load(c);
  } else if (fs::exists(sibling)) {
    run_cfg = config::load_config(sibling);
  }
  auto cfg = run_cfg.value_or(config::Config{});
  if (c.window) cfg.analysis.match.window = *c.window;
  if (half_width) cfg.analysis.match.convention = coincidence::WindowConvention::kHalfWidth;
  const auto dir = prepare_out(c.out);

  const auto alice = read_tags(alice_path);
  const auto bob = read_tags(bob_path);
  const auto an = pipeline::analyze_streams(alice, bob, cfg.analysis);
  const auto est = coincidence::estimate(an.coincidences);
  const auto labels = coincidence::default_labels();

  std::vector<std::string> outputs;
  write_file_atomic(dir / "bell.csv", coincidence::format_csv(an.coincidences, est, labels));
  outputs.push_back((dir / "bell.csv").string());
  std::string report = coincidence::format_report(an.coincidences, est, labels);
  std::optional<coincidence::BellEstimate> sub;
  if (subtract) {
    sub = coincidence::estimate_background_subtracted(an.coincidences);
    write_file_atomic(dir / "bell_subtracted.csv", coincidence::format_csv(an.coincidences, *sub, labels));
    outputs.push_back((dir / "bell_subtracted.csv").string());
    report += "\n" + coincidence::format_report(an.coincidences, *sub, labels);
  }
  if (hist_range > 0.0) {
    const std::int64_t bin = 50;
    const auto range = static_cast<std::int64_t>(hist_range * 1e12);
    const auto h = coincidence::delta_histogram(alice, bob, an.offset.offset, range, bin);
    std::ostringstream os;
    os << "delta_ps,count\n";
    for (std::size_t i = 0; i < h.size(); ++i) os << -range + static_cast<std::int64_t>(i) * bin + bin / 2 << ',' << h[i] << '\n';
    write_file_atomic(dir / "histogram.csv", os.str());
    outputs.push_back((dir / "histogram.csv").string());
  }

  std::ostringstream head;
  head << "offset: " << an.offset.offset << " ps (" << std::fixed << std::setprecision(1) << an.offset.significance
       << " sigma peak)\n";
  if (an.drift_clamped) head << "warning: drift corrections clamped\n";
  std::optional<spacetime::LoopholeVerdict> verdict;
  if (run_cfg) {
    verdict = photonsim::scenario_verdict(run_cfg->scenario);
    head << "scenario " << run_cfg->scenario.name << ": locality " << (verdict->locality_closed ? "CLOSED" : "OPEN")
         << ", freedom-of-choice " << (verdict->freedom_closed ? "CLOSED" : "OPEN") << "\n";
  }
  std::cout << head.str() << report;
  write_file_atomic(dir / "report.txt", head.str() + report);
  outputs.push_back((dir / "report.txt").string());

  json body = {{"inputs", {alice_path, bob_path}},
               {"analysis_hash", config::config_hash(cfg)},
               {"offset_ps", an.offset.offset},
               {"offset_significance", an.offset.significance},
               {"coincidences", an.coincidences.total},
               {"S", est.s},
               {"sigma_S", est.sigma_s},
               {"sigma_above_2", est.sigma_above_2},
               {"drift_clamped", an.drift_clamped},
               {"outputs", outputs},
               {"warnings", an.warnings}};
  if (verdict) body["verdict"] = verdict_json(*verdict);
  if (run_cfg) body["config_hash"] = config::config_hash(*run_cfg);
  write_manifest(dir, "analyze", body, timer, started);
  for (const auto& w : an.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_tomo(const Common& c, const std::string& counts_path, const std::vector<double>& simulate, int bootstrap) {
  const Timer timer;
  const auto started = utc_now();
  const auto dir = prepare_out(c.out);
  const std::uint64_t seed = c.seed.value_or(1);
  tomography::TomographyData data;
  std::vector<std::string> outputs;
  json source;
  if (!simulate.empty()) {
    const double v = simulate[0];
    const double n = simulate.size() > 1 ? simulate[1] : 1e5;
    data = tomography::simulate_counts(quantum::werner(v), n, derive_seed(seed, "tomo-counts"));
    write_file_atomic(dir / "counts.csv", tomography::format_counts_csv(data));
    outputs.push_back((dir / "counts.csv").string());
    source = {{"simulated_visibility", v}, {"counts_per_setting", n}};
  } else {
    if (counts_path.empty()) fail(ErrorKind::kInput, "tomo needs a counts CSV or --simulate V [N]");
    data = tomography::read_counts_csv(counts_path);
    source = {{"counts_file", counts_path}};
  }
  const auto r = tomography::report(data, bootstrap, derive_seed(seed, "tomo-bootstrap"));
  write_file_atomic(dir / "rho_re.csv", tomography::format_matrix_csv(r.rho.matrix(), false));
  write_file_atomic(dir / "rho_im.csv", tomography::format_matrix_csv(r.rho.matrix(), true));
  const auto text = tomography::format_report(r);
  write_file_atomic(dir / "tomography.txt", text);
  for (const char* f : {"rho_re.csv", "rho_im.csv", "tomography.txt"}) outputs.push_back((dir / f).string());
  std::cout << text;

  auto metric = [](const tomography::Metric& m) {
    return json{{"value", m.value}, {"sigma", m.sigma}, {"bootstrap_bias", m.bias}};
  };
  json body = {{"seed", seed},
               {"source", source},
               {"bootstrap_samples", bootstrap},
               {"converged", r.converged},
               {"tangle", metric(r.tangle)},
               {"linear_entropy", metric(r.linear_entropy)},
               {"fully_entangled_fraction", metric(r.fully_entangled_fraction)},
               {"S_tomo", metric(r.s_tomo)},
               {"S_opt", metric(r.s_opt)},
               {"outputs", outputs}};
  write_manifest(dir, "tomo", body, timer, started);
  return r.converged ? 0 : kExitNumerical;
}

int cmd_table2(const Common& c) {
  const Timer timer;
  const auto started = utc_now();
  const auto dir = prepare_out(c.out);
  const std::uint64_t base = c.seed.value_or(1);

  std::ostringstream csv, text;
  csv << "scenario,locality,freedom_of_choice,duration_s,coincidences,S,sigma_S,sigma_above_2\n";
  text << "scenario  locality  freedom   duration      N        S      sigma\n";
  json rows = json::array();
  json hashes = json::object();
  for (const auto& name : config::preset_names()) {
    auto cfg = config::preset(name);
    if (c.duration) config::set_duration(cfg, *c.duration);
    if (c.window) cfg.analysis.match.window = *c.window;
    const auto sum = pipeline::simulate_and_analyze(cfg, derive_seed(base, name));
    const auto& v = sum.verdict;
    const char* loc = v.locality_closed ? "closed" : "open";
    const char* fre = v.freedom_closed ? "closed" : "open";
    csv << name << ',' << loc << ',' << fre << ',' << sum.duration << ',' << sum.coincidences();
    text << std::left << std::setw(10) << name << std::setw(10) << loc << std::setw(10) << fre << std::right
         << std::setw(8) << sum.duration << std::setw(8) << sum.coincidences();
    json row = {{"scenario", name}, {"verdict", verdict_json(v)}, {"coincidences", sum.coincidences()}};
    if (sum.estimate) {
      const auto& e = *sum.estimate;
      csv << ',' << std::setprecision(6) << e.s << ',' << e.sigma_s << ',' << e.sigma_above_2;
      text << std::fixed << std::setprecision(3) << std::setw(9) << e.s << std::setw(9) << e.sigma_s;
      text.unsetf(std::ios::fixed);
      row["S"] = e.s;
      row["sigma_S"] = e.sigma_s;
    } else {
      csv << ",,,";
      text << "        -        -";
    }
    csv << '\n';
    text << '\n';
    rows.push_back(row);
    hashes[name] = config::config_hash(cfg);
    for (const auto& w : sum.warnings) std::cerr << "warning (" << name << "): " << w << "\n";
  }
  write_file_atomic(dir / "table2.csv", csv.str());
  write_file_atomic(dir / "table2.txt", text.str());
  std::cout << text.str();
  json body = {{"seed", base},
               {"config_hashes", hashes},
               {"rows", rows},
               {"outputs", {(dir / "table2.csv").string(), (dir / "table2.txt").string()}}};
  write_manifest(dir, "table2", body, timer, started);
  return 0;
}

int exit_code(ErrorKind k) {
  return k == ErrorKind::kNumerical ? kExitNumerical : kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bell test simulator: space-time verdicts, photon streams, coincidence analysis, tomography"};
  app.require_subcommand(1);
  Common common;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "scenario INI file")->check(CLI::ExistingFile);
    sub->add_option("--scenario", common.scenario, "built-in scenario")->check(CLI::IsMember({"a", "b", "c", "d"}));
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", common.seed, "random seed"); };
  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", common.out, "output directory")->capture_default_str(); };
  auto add_window = [&](CLI::App* sub) { sub->add_option("--window", common.window, "coincidence window, s"); };

  auto* verdict = app.add_subcommand("verdict", "event table, interval classes and loophole verdicts");
  add_config(verdict);
  bool deterministic = false;
  verdict->add_flag("--deterministic", deterministic, "replace both setting sources by periodic generators");

  auto* run = app.add_subcommand("run", "simulate one run and write both tag streams");
  add_config(run);
  add_seed(run);
  add_out(run);
  run->add_option("--duration", common.duration, "run length, s");
  bool no_csv = false;
  run->add_flag("--no-csv", no_csv, "skip the CSV mirrors of the tag files");

  auto* analyze = app.add_subcommand("analyze", "offset, drift, matching and CHSH estimate of two tag files");
  std::string alice_path, bob_path;
  analyze->add_option("alice", alice_path, "Alice tag file (.tags or .csv)")->required()->check(CLI::ExistingFile);
  analyze->add_option("bob", bob_path, "Bob tag file (.tags or .csv)")->required()->check(CLI::ExistingFile);
  add_config(analyze);
  add_out(analyze);
  add_window(analyze);
  bool half_width = false, subtract = false;
  double hist_range = 0.0;
  analyze->add_flag("--half-width", half_width, "treat --window as the half width");
  analyze->add_flag("--subtract", subtract, "also report the accidental-subtracted estimate");
  analyze->add_option("--histogram", hist_range, "write a time-difference histogram over +-RANGE seconds");

  auto* tomo = app.add_subcommand("tomo", "two-photon state tomography report");
  std::string counts_path;
  std::vector<double> simulate;
  int bootstrap = 100;
  tomo->add_option("counts", counts_path, "counts CSV (alice_proj,bob_proj,count)")->check(CLI::ExistingFile);
  tomo->add_option("--simulate", simulate, "simulate a Werner state: V [N per setting]")->expected(1, 2);
  tomo->add_option("--bootstrap", bootstrap, "bootstrap resamples")->capture_default_str()->check(CLI::NonNegativeNumber);
  add_seed(tomo);
  add_out(tomo);

  auto* table2 = app.add_subcommand("table2", "run the four built-in scenarios and tabulate verdicts and S");
  add_seed(table2);
  add_out(table2);
  add_window(table2);
  table2->add_option("--duration", common.duration, "override every scenario's run length, s");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }
  if (!common.config_path.empty() && !common.scenario.empty()) {
    std::cerr << "error: --config and --scenario are mutually exclusive\n";
    return kExitInput;
  }

  try {
    if (*verdict) return cmd_verdict(common, deterministic);
    if (*run) return cmd_run(common, no_csv);
    if (*analyze) return cmd_analyze(common, alice_path, bob_path, half_width, hist_range, subtract);
    if (*tomo) return cmd_tomo(common, counts_path, simulate, bootstrap);
    if (*table2) return cmd_table2(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
