#pragma once

// Line-delimited JSON request/response protocol for driving a controller from
// an external inference runtime.
//
// Requests (one JSON object per line, "type" selects the kind):
//   {"type":"init","vocab_size":N,"config":{...}}        -> ready
//   {"type":"step","t":..,"logits":[..],"ref_logits":[..]?,"token_id":..?,"token_text":..?}
//                                                        -> directive
//   {"type":"sampled","t":..,"token_id":..,"token_text":..} -> ack
//   {"type":"finish"}                                    -> summary, session ends
// Responses:
//   {"type":"ready","vocab_size":N}
//   {"type":"directive","t":..,"intervened":..,"mode":..,"logits":[..]?,"temperature":..?,"event":{..}}
//   {"type":"ack","t":..}
//   {"type":"summary",...}
//   {"type":"error","code":..,"message":..}
//
// `logits` is omitted from passthrough directives. Every error leaves the
// session usable.

#include <iosfwd>
#include <string>

#include "spreg/controller.hpp"

namespace spreg {

struct ServeStats {
  std::size_t requests = 0;
  std::size_t errors = 0;
  bool finished = false;  // false: stream hit EOF first
};

/// Runs until `finish` or EOF. `base` supplies defaults that an init's
/// `config` object overrides.
ServeStats serve_stdio(std::istream& in, std::ostream& out, const ControllerConfig& base);

/// Session state machine behind serve_stdio(); one request line in, one
/// response line out.
class ServeSession {
 public:
  explicit ServeSession(ControllerConfig base);

  std::string handle(const std::string& line);
  bool finished() const noexcept { return finished_; }

 private:
  ControllerConfig base_;
  std::optional<Controller> ctrl_;
  bool finished_ = false;
};

}  // namespace spreg
