#include "spreg/serve.hpp"

#include <istream>
#include <ostream>

#include "spreg/errors.hpp"
#include "spreg/trace_io.hpp"

namespace spreg {

namespace {

using nlohmann::json;

std::string error_response(const std::string& code, const std::string& message) {
  return json{{"type", "error"}, {"code", code}, {"message", message}}.dump();
}

}  // namespace

ServeSession::ServeSession(ControllerConfig base) : base_(std::move(base)) {}

std::string ServeSession::handle(const std::string& line) {
  FloatJson req;
  try {
    req = FloatJson::parse(line);
  } catch (const FloatJson::exception& e) {
    return error_response("malformed", e.what());
  }
  if (!req.is_object() || !req.contains("type") || !req["type"].is_string()) {
    return error_response("malformed", "request must be an object with a string 'type'");
  }
  const std::string type = req["type"].get<std::string>();

  try {
    if (type == "init") {
      if (ctrl_) return error_response("already_initialized", "session is already initialized");
      // Reparse with double precision so config values are not rounded to f32.
      const json full = json::parse(line);
      ControllerConfig cfg = base_;
      if (full.contains("config") && !full["config"].is_null()) cfg = config_from_json(full["config"], cfg);
      if (!full.contains("vocab_size") || !full["vocab_size"].is_number_integer()) {
        return error_response("config", "init needs an integer 'vocab_size'");
      }
      const auto vocab = full["vocab_size"].get<std::int64_t>();
      if (vocab < 2) return error_response("config", "vocab_size must be >= 2");
      cfg.vocab_size = static_cast<std::size_t>(vocab);
      ctrl_.emplace(std::move(cfg));
      return json{{"type", "ready"}, {"vocab_size", vocab}}.dump();
    }

    if (type == "finish") {
      if (!ctrl_) return error_response("not_initialized", "finish before init");
      finished_ = true;
      json s = to_json(ctrl_->finish());
      s["type"] = "summary";
      return s.dump();
    }

    if (!ctrl_) {
      if (type == "step" || type == "sampled") {
        return error_response("not_initialized", "'" + type + "' before init");
      }
      return error_response("unknown_type", "unknown request type '" + type + "'");
    }

    if (type == "step") {
      const TraceRecord rec = trace_record_from_json(req);
      const LogitVector cond = LogitVector::from_f32(rec.logits);
      std::optional<LogitVector> ref;
      if (rec.ref_logits) ref = LogitVector::from_f32(*rec.ref_logits);
      const StepResult r = ctrl_->process_step(rec.t, cond, ref, rec.sampled());

      json resp{{"type", "directive"},
                {"t", r.directive.t},
                {"intervened", r.directive.intervened},
                {"mode", std::string(to_string(r.directive.mode))},
                {"event", to_json(r.event)}};
      if (r.directive.temperature_override) resp["temperature"] = *r.directive.temperature_override;
      std::string out = resp.dump();
      if (r.directive.logits) {
        out.pop_back();
        out += ",\"logits\":";
        out += FloatJson(r.directive.logits->to_f32()).dump();
        out += '}';
      }
      return out;
    }

    if (type == "sampled") {
      const std::int64_t last = ctrl_->finish().total_steps - 1;
      if (!req.contains("t") || !req["t"].is_number_integer()) {
        return error_response("malformed", "'sampled' needs an integer 't'");
      }
      const auto t = req["t"].get<std::int64_t>();
      if (t != last) {
        return error_response("protocol", "'sampled' for t=" + std::to_string(t) + " but the last step is " +
                                              std::to_string(last));
      }
      std::optional<TokenId> id;
      if (req.contains("token_id") && !req["token_id"].is_null()) id = req["token_id"].get<TokenId>();
      const std::string text = req.value("token_text", std::string());
      ctrl_->notify_sampled(id, text);
      return json{{"type", "ack"}, {"t", t}}.dump();
    }

    return error_response("unknown_type", "unknown request type '" + type + "'");
  } catch (const FormatError& e) {
    return error_response("malformed", e.what());
  } catch (const Error& e) {
    return error_response(e.code(), e.what());
  } catch (const json::exception& e) {
    return error_response("malformed", e.what());
  }
}

ServeStats serve_stdio(std::istream& in, std::ostream& out, const ControllerConfig& base) {
  ServeSession session(base);
  ServeStats stats;
  std::string line;
  while (!session.finished() && std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++stats.requests;
    const std::string resp = session.handle(line);
    if (resp.rfind("{\"code\"", 0) == 0) ++stats.errors;
    out << resp << '\n' << std::flush;
  }
  stats.finished = session.finished();
  return stats;
}

}  // namespace spreg
