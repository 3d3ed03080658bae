// spreg: run synthetic scenarios, replay recorded traces, serve the
// line-delimited protocol, and summarize event logs.
//
// Exit codes: 0 ok, 2 configuration or usage error, 3 malformed input or
// protocol violation, 1 anything else.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "spreg/errors.hpp"
#include "spreg/harness.hpp"
#include "spreg/serve.hpp"
#include "spreg/trace_io.hpp"

namespace {

using nlohmann::json;

struct ConfigArgs {
  std::string preset;
  std::string path;

  spreg::ControllerConfig resolve() const {
    spreg::ControllerConfig c = preset.empty() ? spreg::ControllerConfig{} : spreg::preset_config(preset);
    if (!path.empty()) c = spreg::load_config(path, c);
    return c;
  }
};

void add_config_options(CLI::App* sub, ConfigArgs& args) {
  sub->add_option("--preset", args.preset, "Named parameter set: method or experiments");
  sub->add_option("--config", args.path, "JSON config file (overrides the preset)");
}

void write_outputs(const std::vector<spreg::EventRecord>& events, const std::string& events_path,
                   const std::string& csv_path) {
  if (!events_path.empty()) {
    std::ofstream out(events_path);
    if (!out) throw spreg::Error("io", "cannot write " + events_path);
    spreg::write_events(out, events);
  }
  if (!csv_path.empty()) spreg::export_csv(std::filesystem::path(csv_path), events);
}

int run_scenario(const std::string& scenario_path, std::optional<std::uint64_t> seed, const ConfigArgs& cfg_args,
                 const std::string& events_path, const std::string& csv_path, const std::string& trace_path) {
  const auto scenario = spreg::harness::Scenario::from_file(scenario_path);
  auto cfg = cfg_args.resolve();
  const auto stream = spreg::harness::generate(scenario, seed, spreg::harness::SpikeCalibration::mirror(cfg));
  if (!trace_path.empty()) spreg::write_trace(std::filesystem::path(trace_path), stream.records);
  cfg.vocab_size = scenario.vocab_size;
  const auto result = spreg::replay(stream.records, cfg);
  write_outputs(result.events, events_path, csv_path);
  json report = spreg::harness::to_json(spreg::harness::evaluate(result.events, stream.truth));
  report["scenario"] = scenario.name;
  std::cout << report.dump(2) << '\n';
  return 0;
}

int replay_trace(const std::string& trace_path, const ConfigArgs& cfg_args, const std::string& events_path,
                 const std::string& csv_path) {
  const auto records = spreg::read_trace(std::filesystem::path(trace_path));
  const auto result = spreg::replay(records, cfg_args.resolve());
  write_outputs(result.events, events_path, csv_path);
  std::cout << spreg::to_json(result.summary).dump(2) << '\n';
  return 0;
}

int analyze(const std::string& events_path, const std::string& csv_path, const std::string& scenario_path,
            std::optional<std::uint64_t> seed) {
  const auto events = spreg::read_events(std::filesystem::path(events_path));
  if (!csv_path.empty()) spreg::export_csv(std::filesystem::path(csv_path), events);
  json report;
  if (!scenario_path.empty()) {
    const auto scenario = spreg::harness::Scenario::from_file(scenario_path);
    const auto stream = spreg::harness::generate(scenario, seed);
    report = spreg::harness::to_json(spreg::harness::evaluate(events, stream.truth));
  } else {
    report = spreg::to_json(spreg::summarize(events));
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-spike-gated adaptive guidance controller"};
  app.require_subcommand(1);

  ConfigArgs cfg_args;
  std::string scenario_path, trace_path, events_path, csv_path;
  std::optional<std::uint64_t> seed;
  bool stdio = false;

  auto* run = app.add_subcommand("run", "Generate a synthetic scenario and run the controller over it");
  run->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--trace", trace_path, "Also write the generated trace (JSONL)");
  run->add_option("--events", events_path, "Write the event log (JSONL)");
  run->add_option("--csv", csv_path, "Write per-step CSV");
  add_config_options(run, cfg_args);

  auto* rep = app.add_subcommand("replay", "Run the controller over a recorded trace");
  rep->add_option("--trace", trace_path, "Trace JSONL")->required();
  rep->add_option("--events", events_path, "Write the event log (JSONL)");
  rep->add_option("--csv", csv_path, "Write per-step CSV");
  add_config_options(rep, cfg_args);

  auto* srv = app.add_subcommand("serve", "Serve the line-delimited JSON protocol");
  srv->add_flag("--stdio", stdio, "Read requests from stdin, write responses to stdout")->required();
  add_config_options(srv, cfg_args);

  auto* ana = app.add_subcommand("analyze", "Summarize an event log");
  ana->add_option("--events", events_path, "Event log JSONL")->required();
  ana->add_option("--csv", csv_path, "Write per-step CSV");
  ana->add_option("--scenario", scenario_path, "Score detections against this scenario's injections");
  ana->add_option("--seed", seed, "Scenario seed override");

  auto* cfg = app.add_subcommand("config", "Print the effective configuration");
  add_config_options(cfg, cfg_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_scenario(scenario_path, seed, cfg_args, events_path, csv_path, trace_path);
    if (*rep) return replay_trace(trace_path, cfg_args, events_path, csv_path);
    if (*srv) {
      std::ios::sync_with_stdio(false);
      spreg::serve_stdio(std::cin, std::cout, cfg_args.resolve());
      return 0;
    }
    if (*ana) return analyze(events_path, csv_path, scenario_path, seed);
    if (*cfg) {
      std::cout << spreg::config_to_json(cfg_args.resolve()).dump(2) << '\n';
      return 0;
    }
  } catch (const spreg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const spreg::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 3;
  } catch (const spreg::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
