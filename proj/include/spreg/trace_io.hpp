#pragma once

// Line-delimited JSON traces and event logs, CSV export, offline replay, and
// the controller config file.
//
// Trace lines carry f32 logits. They are parsed with a float-typed JSON so
// every value goes through strtof and round-trips bit-exactly.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spreg/controller.hpp"

namespace spreg {

using FloatJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t, std::uint64_t, float>;

struct TraceRecord {
  std::int64_t t = 0;
  std::vector<float> logits;
  std::optional<std::vector<float>> ref_logits;
  std::optional<TokenId> token_id;        // sampled at t - 1
  std::optional<std::string> token_text;  // sampled at t - 1

  std::optional<SampledToken> sampled() const;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

FloatJson to_json(const TraceRecord& r);
/// Throws FormatError (line 0; callers add the line number).
TraceRecord trace_record_from_json(const FloatJson& j);

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records);
void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& records);

/// Throws FormatError naming the 1-based line on malformed JSON, a vocabulary
/// change, or a t that is not 0, 1, 2, ...
std::vector<TraceRecord> read_trace(std::istream& in);
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

nlohmann::json to_json(const EventRecord& e);
EventRecord event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Summary& s);

void write_events(std::ostream& out, const std::vector<EventRecord>& events);
std::vector<EventRecord> read_events(std::istream& in);
std::vector<EventRecord> read_events(const std::filesystem::path& path);

/// Columns: t,H,mu,sigma,gradient,phase,step_type,spike,lambda,mode.
/// Numbers use 6 significant digits; missing values are empty cells.
void export_csv(std::ostream& out, const std::vector<EventRecord>& events);
void export_csv(const std::filesystem::path& path, const std::vector<EventRecord>& events);

struct ReplayResult {
  std::vector<Directive> directives;
  std::vector<EventRecord> events;
  Summary summary;
};

/// Drives a fresh controller over the trace. `config.vocab_size` is taken
/// from the trace when it is 0.
ReplayResult replay(const std::vector<TraceRecord>& records, ControllerConfig config);

// Config files mirror ControllerConfig field names. Missing fields keep the
// values in `base`. `patterns` may be an inline object or a path relative to
// `base_dir`. Throws ConfigError.
ControllerConfig config_from_json(const nlohmann::json& j, ControllerConfig base = {},
                                  const std::filesystem::path& base_dir = {});
ControllerConfig load_config(const std::filesystem::path& path, ControllerConfig base = {});
/// Full config, including per-section `doc` objects naming each constant.
nlohmann::json config_to_json(const ControllerConfig& c);

/// Named starting points: "method" (α = 1.5) and "experiments" (α = 2.0).
ControllerConfig preset_config(const std::string& name);

}  // namespace spreg
