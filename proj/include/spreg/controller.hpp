#pragma once

// Per-stream Monitor-Detect-Repair loop: one logit vector in, one Directive and
// one EventRecord out.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "spreg/detector.hpp"
#include "spreg/distributions.hpp"
#include "spreg/monitor.hpp"
#include "spreg/plan_tracker.hpp"
#include "spreg/repair.hpp"

namespace spreg {

struct MonitorConfig {
  std::size_t window = 10;             // W
  double entropy_base = kNaturalBase;  // log base of reported and thresholded entropies
};

struct ControllerConfig {
  std::size_t vocab_size = 0;
  MonitorConfig monitor;
  DetectorConfig detector;
  RepairParams repair;
  GuidanceTable guidance;
  std::shared_ptr<const PatternSet> patterns = PatternSet::defaults();
  std::size_t tracker_tail = 256;

  /// Throws ConfigError.
  void validate() const;
};

enum class InterventionMode { None, Repair, Aggressive };
enum class ReferenceSource { NotApplicable, Pool, External, Uniform };

std::string_view to_string(InterventionMode m);
std::string_view to_string(ReferenceSource s);
std::optional<InterventionMode> parse_mode(std::string_view s);
std::optional<ReferenceSource> parse_reference_source(std::string_view s);

struct Directive {
  std::int64_t t = 0;
  std::optional<LogitVector> logits;  // nullopt: pass the conditional logits through
  std::optional<double> temperature_override;
  bool intervened = false;
  InterventionMode mode = InterventionMode::None;

  /// The logits the host should sample from.
  const LogitVector& logits_or(const LogitVector& cond) const { return logits ? *logits : cond; }
};

struct EventRecord {
  std::int64_t t = 0;
  double entropy = 0.0;  // of the conditional distribution
  std::optional<double> mu;
  std::optional<double> sigma;
  std::optional<double> gradient;
  std::string phase;  // phase in effect when the step arrived
  StepType step_type = StepType::Reasoning;
  bool spike = false;  // a repair was triggered at this step
  int high_entropy_count = 0;
  InterventionMode mode = InterventionMode::None;
  std::optional<double> lambda_applied;
  std::optional<double> lambda_unclamped;
  std::optional<int> repair_index;
  std::optional<int> repair_duration;  // on trigger steps
  ReferenceSource reference_source = ReferenceSource::NotApplicable;
  std::optional<double> modified_entropy;  // of the directive's sampling distribution

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct StepResult {
  Directive directive;
  EventRecord event;
};

/// Token the host sampled at the previous step.
struct SampledToken {
  std::optional<TokenId> id;
  std::string text;
};

struct Summary {
  std::int64_t total_steps = 0;
  std::int64_t spikes = 0;
  std::int64_t repairs = 0;
  std::int64_t repair_steps = 0;
  std::int64_t aggressive = 0;
  double mean_entropy = 0.0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

Summary summarize(std::span<const EventRecord> events);

class Controller {
 public:
  /// Throws ConfigError.
  explicit Controller(ControllerConfig config);

  /**
   * Runs one decoding step.
   *
   * `sampled`, when given, is the token the host sampled at t - 1 and is
   * equivalent to calling notify_sampled() before this step. Nothing is
   * mutated if validation fails.
   */
  StepResult process_step(std::int64_t t, const LogitVector& cond, const std::optional<LogitVector>& ref = {},
                          const std::optional<SampledToken>& sampled = {});

  /// Records the token sampled after the most recent process_step().
  /// Throws ProtocolError if called twice for one step or before any step.
  void notify_sampled(std::optional<TokenId> id, std::string_view text);

  Summary finish() const;

  const ControllerConfig& config() const noexcept { return config_; }
  const ControlPhase& phase() const noexcept { return detector_.phase(); }
  const EntropyWindow& window() const noexcept { return window_; }
  const ReferencePool& pool() const noexcept { return pool_; }
  const RecentTokens& recent() const noexcept { return recent_; }
  StepType step_type() const noexcept { return tracker_.current(); }

 private:
  void apply_sampled(std::optional<TokenId> id, std::string_view text);

  ControllerConfig config_;
  EntropyWindow window_;
  HighEntropyCounter counter_;
  Detector detector_;
  PlanTracker tracker_;
  ReferencePool pool_;
  RecentTokens recent_;

  std::optional<std::int64_t> last_t_;
  bool sampled_for_last_ = false;
  Summary tally_;
  double entropy_sum_ = 0.0;
};

}  // namespace spreg
