#include "spreg/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spreg/errors.hpp"

namespace spreg {

std::optional<SampledToken> TraceRecord::sampled() const {
  if (!token_id && !token_text) return std::nullopt;
  return SampledToken{token_id, token_text.value_or("")};
}

FloatJson to_json(const TraceRecord& r) {
  FloatJson j;
  j["t"] = r.t;
  j["logits"] = r.logits;
  if (r.ref_logits) j["ref_logits"] = *r.ref_logits;
  if (r.token_id) j["token_id"] = *r.token_id;
  if (r.token_text) j["token_text"] = *r.token_text;
  return j;
}

namespace {

std::vector<float> float_array(const FloatJson& j, const char* field) {
  if (!j.is_array()) throw FormatError(std::string("'") + field + "' must be an array");
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError(std::string("'") + field + "' must contain only numbers");
    out.push_back(v.get<float>());
  }
  return out;
}

}  // namespace

TraceRecord trace_record_from_json(const FloatJson& j) {
  if (!j.is_object()) throw FormatError("trace record must be a JSON object");
  TraceRecord r;
  if (!j.contains("t") || !j["t"].is_number_integer()) throw FormatError("trace record needs an integer 't'");
  r.t = j["t"].get<std::int64_t>();
  if (!j.contains("logits")) throw FormatError("trace record needs 'logits'");
  r.logits = float_array(j["logits"], "logits");
  if (j.contains("ref_logits") && !j["ref_logits"].is_null()) r.ref_logits = float_array(j["ref_logits"], "ref_logits");
  if (j.contains("token_id") && !j["token_id"].is_null()) {
    if (!j["token_id"].is_number_integer()) throw FormatError("'token_id' must be an integer");
    r.token_id = j["token_id"].get<TokenId>();
  }
  if (j.contains("token_text") && !j["token_text"].is_null()) {
    if (!j["token_text"].is_string()) throw FormatError("'token_text' must be a string");
    r.token_text = j["token_text"].get<std::string>();
  }
  return r;
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write trace " + path.string());
  write_trace(out, records);
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TraceRecord r;
    try {
      r = trace_record_from_json(FloatJson::parse(line));
    } catch (const FloatJson::exception& e) {
      throw FormatError(std::string("malformed trace record: ") + e.what(), line_no);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line_no);
    }
    const std::int64_t expected = records.empty() ? 0 : records.back().t + 1;
    if (r.t != expected) {
      throw FormatError("expected t=" + std::to_string(expected) + ", got t=" + std::to_string(r.t), line_no);
    }
    if (!records.empty() && r.logits.size() != records.front().logits.size()) {
      throw FormatError("vocabulary size changed from " + std::to_string(records.front().logits.size()) + " to " +
                            std::to_string(r.logits.size()),
                        line_no);
    }
    if (r.ref_logits && r.ref_logits->size() != r.logits.size()) {
      throw FormatError("ref_logits length differs from logits", line_no);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open trace " + path.string());
  return read_trace(in);
}

namespace {

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> opt_get(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

nlohmann::json to_json(const EventRecord& e) {
  return nlohmann::json{
      {"t", e.t},
      {"entropy", e.entropy},
      {"mu", opt(e.mu)},
      {"sigma", opt(e.sigma)},
      {"gradient", opt(e.gradient)},
      {"phase", e.phase},
      {"step_type", std::string(to_string(e.step_type))},
      {"spike", e.spike},
      {"high_entropy_count", e.high_entropy_count},
      {"mode", std::string(to_string(e.mode))},
      {"lambda", opt(e.lambda_applied)},
      {"lambda_unclamped", opt(e.lambda_unclamped)},
      {"repair_index", opt(e.repair_index)},
      {"repair_duration", opt(e.repair_duration)},
      {"reference_source", std::string(to_string(e.reference_source))},
      {"modified_entropy", opt(e.modified_entropy)},
  };
}

EventRecord event_from_json(const nlohmann::json& j) {
  try {
    EventRecord e;
    e.t = j.at("t").get<std::int64_t>();
    e.entropy = j.at("entropy").get<double>();
    e.mu = opt_get<double>(j, "mu");
    e.sigma = opt_get<double>(j, "sigma");
    e.gradient = opt_get<double>(j, "gradient");
    e.phase = j.at("phase").get<std::string>();
    const auto st = parse_step_type(j.at("step_type").get<std::string>());
    if (!st) throw FormatError("unknown step_type");
    e.step_type = *st;
    e.spike = j.at("spike").get<bool>();
    e.high_entropy_count = j.value("high_entropy_count", 0);
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw FormatError("unknown mode");
    e.mode = *mode;
    e.lambda_applied = opt_get<double>(j, "lambda");
    e.lambda_unclamped = opt_get<double>(j, "lambda_unclamped");
    e.repair_index = opt_get<int>(j, "repair_index");
    e.repair_duration = opt_get<int>(j, "repair_duration");
    const auto src = parse_reference_source(j.value("reference_source", std::string("n/a")));
    if (!src) throw FormatError("unknown reference_source");
    e.reference_source = *src;
    e.modified_entropy = opt_get<double>(j, "modified_entropy");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed event: ") + ex.what());
  }
}

nlohmann::json to_json(const Summary& s) {
  return nlohmann::json{{"total_steps", s.total_steps},   {"spikes", s.spikes},
                        {"repairs", s.repairs},           {"repair_steps", s.repair_steps},
                        {"aggressive", s.aggressive},     {"mean_entropy", s.mean_entropy}};
}

void write_events(std::ostream& out, const std::vector<EventRecord>& events) {
  for (const auto& e : events) out << to_json(e).dump() << '\n';
}

std::vector<EventRecord> read_events(std::istream& in) {
  std::vector<EventRecord> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed event: ") + e.what(), line_no);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  return events;
}

std::vector<EventRecord> read_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open events " + path.string());
  return read_events(in);
}

namespace {

std::string num6(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

}  // namespace

void export_csv(std::ostream& out, const std::vector<EventRecord>& events) {
  out << "t,H,mu,sigma,gradient,phase,step_type,spike,lambda,mode\n";
  for (const auto& e : events) {
    out << e.t << ',' << num6(e.entropy) << ',' << num6(e.mu) << ',' << num6(e.sigma) << ',' << num6(e.gradient)
        << ',' << e.phase << ',' << to_string(e.step_type) << ',' << (e.spike ? "true" : "false") << ','
        << num6(e.lambda_applied) << ',' << to_string(e.mode) << '\n';
  }
}

void export_csv(const std::filesystem::path& path, const std::vector<EventRecord>& events) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write csv " + path.string());
  export_csv(out, events);
}

ReplayResult replay(const std::vector<TraceRecord>& records, ControllerConfig config) {
  if (config.vocab_size == 0) {
    if (records.empty()) throw FormatError("empty trace");
    config.vocab_size = records.front().logits.size();
  }
  Controller ctrl(std::move(config));
  ReplayResult out;
  out.directives.reserve(records.size());
  out.events.reserve(records.size());
  for (const auto& r : records) {
    const LogitVector cond = LogitVector::from_f32(r.logits);
    std::optional<LogitVector> ref;
    if (r.ref_logits) ref = LogitVector::from_f32(*r.ref_logits);
    auto step = ctrl.process_step(r.t, cond, ref, r.sampled());
    out.directives.push_back(std::move(step.directive));
    out.events.push_back(std::move(step.event));
  }
  out.summary = ctrl.finish();
  return out;
}

}  // namespace spreg
