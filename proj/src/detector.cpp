#include "spreg/detector.hpp"

#include <cmath>
#include <string>

#include "spreg/errors.hpp"

namespace spreg {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void DetectorConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("detector: " + what); };
  if (!(alpha > 0.0)) fail("alpha must be > 0");
  if (!(h_min >= 0.0)) fail("h_min must be >= 0");
  if (!std::isfinite(g_min)) fail("g_min must be finite");
  if (!(h_extreme > h_min)) fail("h_extreme must exceed h_min");
  if (t_warm < 0) fail("t_warm must be >= 0");
  if (t_cool < 0) fail("t_cool must be >= 0");
  if (n_grad < 2) fail("n_grad must be >= 2");
  if (c_high < 1) fail("c_high must be >= 1");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
}

std::string_view phase_name(const ControlPhase& p) {
  return std::visit(overloaded{
                        [](const phase::Warmup&) { return std::string_view("warmup"); },
                        [](const phase::Monitoring&) { return std::string_view("monitoring"); },
                        [](const phase::Repairing&) { return std::string_view("repairing"); },
                        [](const phase::Cooldown&) { return std::string_view("cooldown"); },
                    },
                    p);
}

bool prefilter(double gradient, double entropy, const DetectorConfig& cfg) {
  return gradient >= cfg.g_min || entropy >= cfg.h_extreme;
}

bool is_spike(double entropy, double mu, double sigma, const DetectorConfig& cfg) {
  return entropy > mu + cfg.alpha * sigma && entropy >= cfg.h_min;
}

int severity_duration(double entropy, double mu, double sigma, const DetectorConfig& cfg) {
  const double s = (entropy - (mu + cfg.alpha * sigma)) / (sigma + cfg.epsilon);
  if (s < 1.0) return 1;
  if (s < 2.0) return 2;
  return 3;
}

namespace {

ControlPhase after_intervention(const DetectorConfig& cfg) {
  if (cfg.t_cool > 0) return phase::Cooldown{cfg.t_cool};
  return phase::Monitoring{};
}

Transition monitor_step(int repairs_so_far, const StepSignals& s, const DetectorConfig& cfg) {
  if (s.high_entropy_count >= cfg.c_high) {
    return {after_intervention(cfg), decision::AggressiveRecover{}};
  }
  if (!s.stats) return {phase::Monitoring{}, decision::NoAction{}};

  const bool surge = !s.gradient || prefilter(*s.gradient, s.entropy, cfg);
  if (!surge || !is_spike(s.entropy, s.stats->mean, s.stats->stddev, cfg)) {
    return {phase::Monitoring{}, decision::NoAction{}};
  }
  const int d = severity_duration(s.entropy, s.stats->mean, s.stats->stddev, cfg);
  ControlPhase next = d > 1 ? ControlPhase{phase::Repairing{d - 1, repairs_so_far}} : after_intervention(cfg);
  return {next, decision::TriggerRepair{d, repairs_so_far}};
}

}  // namespace

Transition advance(const ControlPhase& current, int repairs_so_far, const StepSignals& s,
                   const DetectorConfig& cfg) {
  return std::visit(
      overloaded{
          [&](const phase::Warmup&) -> Transition {
            if (s.t < cfg.t_warm) return {phase::Warmup{}, decision::NoAction{}};
            return monitor_step(repairs_so_far, s, cfg);
          },
          [&](const phase::Monitoring&) -> Transition { return monitor_step(repairs_so_far, s, cfg); },
          [&](const phase::Repairing& r) -> Transition {
            ControlPhase next = r.remaining > 1 ? ControlPhase{phase::Repairing{r.remaining - 1, r.repair_index}}
                                                : after_intervention(cfg);
            return {next, decision::ContinueRepair{r.repair_index}};
          },
          [&](const phase::Cooldown& c) -> Transition {
            ControlPhase next = c.remaining > 1 ? ControlPhase{phase::Cooldown{c.remaining - 1}}
                                                : ControlPhase{phase::Monitoring{}};
            return {next, decision::NoAction{}};
          },
      },
      current);
}

Detector::Detector(DetectorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Detector::check_step(std::int64_t t) const {
  const std::int64_t expected = last_t_ ? *last_t_ + 1 : 0;
  if (t != expected) {
    throw ProtocolError("expected step " + std::to_string(expected) + ", got " + std::to_string(t));
  }
}

Decision Detector::advance(const StepSignals& s) {
  check_step(s.t);
  Transition tr = spreg::advance(phase_, repairs_, s, cfg_);
  if (std::holds_alternative<decision::TriggerRepair>(tr.decision)) ++repairs_;
  phase_ = tr.next;
  last_t_ = s.t;
  return tr.decision;
}

}  // namespace spreg
