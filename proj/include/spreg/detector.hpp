#pragma once

// Spike decision logic and the warm-up / monitoring / repair / cooldown
// control rhythm.

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include "spreg/monitor.hpp"

namespace spreg {

struct DetectorConfig {
  double alpha = 1.5;       // α, relative spike sensitivity
  double h_min = 2.0;       // H_min, absolute entropy floor (nats)
  double g_min = 0.3;       // g_min, gradient floor (nats/step)
  double h_extreme = 3.5;   // extreme-entropy bypass of the gradient pre-filter
  int t_warm = 5;           // T_warm
  int t_cool = 30;          // T_cool
  int n_grad = 5;           // n, gradient window
  int c_high = 50;          // C_high
  double epsilon = 1e-6;    // guards the severity division

  /// Throws ConfigError.
  void validate() const;

  /// α = 1.5, as stated alongside the detection rule.
  static DetectorConfig method_preset() { return {}; }
  /// α = 2.0, as used for the reported experiments.
  static DetectorConfig experiments_preset() {
    DetectorConfig c;
    c.alpha = 2.0;
    return c;
  }
};

namespace phase {
struct Warmup {
  friend bool operator==(const Warmup&, const Warmup&) = default;
};
struct Monitoring {
  friend bool operator==(const Monitoring&, const Monitoring&) = default;
};
struct Repairing {
  int remaining;     // further repair steps after the current one
  int repair_index;  // r of the triggering repair
  friend bool operator==(const Repairing&, const Repairing&) = default;
};
struct Cooldown {
  int remaining;
  friend bool operator==(const Cooldown&, const Cooldown&) = default;
};
}  // namespace phase

using ControlPhase = std::variant<phase::Warmup, phase::Monitoring, phase::Repairing, phase::Cooldown>;

std::string_view phase_name(const ControlPhase& p);

namespace decision {
struct NoAction {
  friend bool operator==(const NoAction&, const NoAction&) = default;
};
struct TriggerRepair {
  int duration;      // d in {1, 2, 3}
  int repair_index;  // r, zero-based count of earlier triggers
  friend bool operator==(const TriggerRepair&, const TriggerRepair&) = default;
};
struct ContinueRepair {
  int repair_index;
  friend bool operator==(const ContinueRepair&, const ContinueRepair&) = default;
};
struct AggressiveRecover {
  friend bool operator==(const AggressiveRecover&, const AggressiveRecover&) = default;
};
}  // namespace decision

using Decision = std::variant<decision::NoAction, decision::TriggerRepair, decision::ContinueRepair,
                              decision::AggressiveRecover>;

/// True iff g >= g_min or H >= h_extreme.
bool prefilter(double gradient, double entropy, const DetectorConfig& cfg);

/// True iff H > mu + alpha * sigma and H >= h_min.
bool is_spike(double entropy, double mu, double sigma, const DetectorConfig& cfg);

/// Repair length from the excess over the relative threshold in sigma units:
/// s < 1 -> 1, s < 2 -> 2, otherwise 3.
int severity_duration(double entropy, double mu, double sigma, const DetectorConfig& cfg);

/// Everything the state machine looks at for one step.
struct StepSignals {
  std::int64_t t = 0;
  double entropy = 0.0;
  std::optional<WindowStats> stats;  // window before the current entropy
  std::optional<double> gradient;    // nullopt: not enough history, pre-filter passes
  int high_entropy_count = 0;
};

struct Transition {
  ControlPhase next;
  Decision decision;
};

/// Pure transition function. `repairs_so_far` is the r the next trigger gets.
Transition advance(const ControlPhase& current, int repairs_so_far, const StepSignals& s,
                   const DetectorConfig& cfg);

/// Stateful wrapper that also enforces step ordering (t = 0, 1, 2, ...).
class Detector {
 public:
  explicit Detector(DetectorConfig cfg);

  /// Throws ProtocolError on a non-consecutive t; state is unchanged then.
  Decision advance(const StepSignals& s);

  /// Validates t without advancing.
  void check_step(std::int64_t t) const;

  const ControlPhase& phase() const noexcept { return phase_; }
  int repairs_triggered() const noexcept { return repairs_; }
  const DetectorConfig& config() const noexcept { return cfg_; }

 private:
  DetectorConfig cfg_;
  ControlPhase phase_ = phase::Warmup{};
  int repairs_ = 0;
  std::optional<std::int64_t> last_t_;
};

}  // namespace spreg
