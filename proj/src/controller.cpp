#include "spreg/controller.hpp"

#include <cmath>
#include <string>

#include "spreg/errors.hpp"
#include "spreg/kernels.hpp"

namespace spreg {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void tally_event(Summary& s, double& entropy_sum, const EventRecord& e) {
  ++s.total_steps;
  if (e.spike) {
    ++s.spikes;
    ++s.repairs;
  }
  if (e.mode == InterventionMode::Repair) ++s.repair_steps;
  if (e.mode == InterventionMode::Aggressive) ++s.aggressive;
  entropy_sum += e.entropy;
  s.mean_entropy = entropy_sum / static_cast<double>(s.total_steps);
}

}  // namespace

std::string_view to_string(InterventionMode m) {
  switch (m) {
    case InterventionMode::None: return "none";
    case InterventionMode::Repair: return "repair";
    case InterventionMode::Aggressive: return "aggressive";
  }
  return "none";
}

std::string_view to_string(ReferenceSource s) {
  switch (s) {
    case ReferenceSource::NotApplicable: return "n/a";
    case ReferenceSource::Pool: return "pool";
    case ReferenceSource::External: return "external";
    case ReferenceSource::Uniform: return "uniform";
  }
  return "n/a";
}

std::optional<InterventionMode> parse_mode(std::string_view s) {
  for (auto m : {InterventionMode::None, InterventionMode::Repair, InterventionMode::Aggressive}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

std::optional<ReferenceSource> parse_reference_source(std::string_view s) {
  for (auto r : {ReferenceSource::NotApplicable, ReferenceSource::Pool, ReferenceSource::External,
                 ReferenceSource::Uniform}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

void ControllerConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2, got " + std::to_string(vocab_size));
  if (monitor.window == 0) throw ConfigError("monitor.window must be positive");
  if (!(monitor.entropy_base > 1.0)) throw ConfigError("monitor.entropy_base must exceed 1");
  if (!patterns) throw ConfigError("no pattern set configured");
  if (tracker_tail == 0) throw ConfigError("tracker_tail must be positive");
  detector.validate();
  repair.validate();
  guidance.validate();
}

Summary summarize(std::span<const EventRecord> events) {
  Summary s;
  double sum = 0.0;
  for (const auto& e : events) tally_event(s, sum, e);
  return s;
}

namespace {

ControllerConfig validated(ControllerConfig c) {
  c.validate();
  return c;
}

}  // namespace

Controller::Controller(ControllerConfig config)
    : config_(validated(std::move(config))),
      window_(config_.monitor.window, static_cast<std::size_t>(config_.detector.n_grad)),
      counter_{0, config_.detector.c_high},
      detector_(config_.detector),
      tracker_(config_.patterns, config_.tracker_tail),
      pool_(config_.repair.pool_capacity),
      recent_(config_.repair.recent_window) {}

void Controller::apply_sampled(std::optional<TokenId> id, std::string_view text) {
  if (id) recent_.push(*id);
  tracker_.ingest(text);
  sampled_for_last_ = true;
}

void Controller::notify_sampled(std::optional<TokenId> id, std::string_view text) {
  if (!last_t_) throw ProtocolError("sampled token reported before any step");
  if (sampled_for_last_) {
    throw ProtocolError("sampled token already reported for step " + std::to_string(*last_t_));
  }
  apply_sampled(id, text);
}

StepResult Controller::process_step(std::int64_t t, const LogitVector& cond, const std::optional<LogitVector>& ref,
                                    const std::optional<SampledToken>& sampled) {
  detector_.check_step(t);
  if (cond.size() != config_.vocab_size) {
    throw InvalidInput("expected " + std::to_string(config_.vocab_size) + " logits, got " +
                       std::to_string(cond.size()));
  }
  if (ref && ref->size() != config_.vocab_size) throw InvalidInput("reference logits have the wrong length");
  if (sampled) {
    if (!last_t_) throw ProtocolError("step 0 cannot carry a previously sampled token");
    if (sampled_for_last_) {
      throw ProtocolError("sampled token already reported for step " + std::to_string(*last_t_));
    }
  }

  if (sampled) apply_sampled(sampled->id, sampled->text);

  const auto terms = kernels::entropy(cond.values());
  const double h = entropy_in_base(terms.entropy, config_.monitor.entropy_base);
  const std::optional<WindowStats> stats = window_.try_stats();
  const std::optional<double> mu = stats ? std::optional<double>(stats->mean) : std::nullopt;
  const std::optional<double> gradient = window_.gradient_with(h);
  const StepType step = tracker_.classify();
  counter_ = update_counter(counter_, h, mu);

  EventRecord ev;
  ev.t = t;
  ev.entropy = h;
  ev.mu = mu;
  ev.sigma = stats ? std::optional<double>(stats->stddev) : std::nullopt;
  ev.gradient = gradient;
  ev.phase = std::string(phase_name(detector_.phase()));
  ev.step_type = step;
  ev.high_entropy_count = counter_.count;

  const Decision decision = detector_.advance(StepSignals{t, h, stats, gradient, counter_.count});

  Directive dir;
  dir.t = t;
  const double h_norm = std::min(normalized_entropy(terms.entropy, config_.vocab_size), 1.0);
  const auto& rp = config_.repair;

  auto reference = [&]() -> LogProbVector {
    if (ref) {
      ev.reference_source = ReferenceSource::External;
      return log_softmax(*ref);
    }
    ev.reference_source = pool_.empty() ? ReferenceSource::Uniform : ReferenceSource::Pool;
    return synthesize_reference(pool_, config_.vocab_size, rp.aggregation);
  };

  auto repair_step = [&](int repair_index) {
    const LogProbVector ref_lp = reference();
    const auto scale = adaptive_scale_breakdown(h, stats->mean, step, repair_index, config_.guidance, rp);
    const auto w = token_weights(ref_lp.values(), h_norm, rp);
    dir.logits = guided_logits(cond, ref_lp, scale.applied, w, rp.direction);
    dir.mode = InterventionMode::Repair;
    ev.lambda_applied = scale.applied;
    ev.lambda_unclamped = scale.unclamped;
    ev.repair_index = repair_index;
  };

  std::visit(overloaded{
                 [](const decision::NoAction&) {},
                 [&](const decision::TriggerRepair& d) {
                   repair_step(d.repair_index);
                   ev.spike = true;
                   ev.repair_duration = d.duration;
                 },
                 [&](const decision::ContinueRepair& d) { repair_step(d.repair_index); },
                 [&](const decision::AggressiveRecover&) {
                   const LogProbVector ref_lp = reference();
                   const auto ids = recent_.ids();
                   Recovery rec = aggressive_recover(cond, ref_lp, ids, h_norm, rp);
                   dir.logits = std::move(rec.logits);
                   dir.temperature_override = rec.temperature;
                   dir.mode = InterventionMode::Aggressive;
                   ev.lambda_applied = rec.lambda;
                   ev.lambda_unclamped = rec.lambda;
                   counter_.count = 0;
                 },
             },
             decision);

  dir.intervened = dir.mode != InterventionMode::None;
  ev.mode = dir.mode;
  if (dir.logits) {
    const double temp = dir.temperature_override.value_or(1.0);
    const double m = shannon_entropy(temp == 1.0 ? *dir.logits : apply_temperature(*dir.logits, temp));
    ev.modified_entropy = entropy_in_base(m, config_.monitor.entropy_base);
  }

  // Repaired distributions are synthetic and never enter the prior.
  if (dir.mode == InterventionMode::None && mu) pool_.record_logits(cond.values(), terms.log_normalizer, h, *mu);
  window_.push(h);

  last_t_ = t;
  sampled_for_last_ = false;
  tally_event(tally_, entropy_sum_, ev);
  return {std::move(dir), std::move(ev)};
}

Summary Controller::finish() const { return tally_; }

}  // namespace spreg
