#pragma once

// Synthetic logit streams with scripted entropy regimes and injected
// anomalies, plus detection metrics against the known ground truth.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "spreg/controller.hpp"
#include "spreg/trace_io.hpp"

namespace spreg::harness {

/// Entropy held near a target: target + jitter * U(-1, 1).
struct Stable {
  std::int64_t start = 0;
  std::int64_t end = 0;  // exclusive
  double target_entropy = 1.0;
  double jitter = 0.05;
};

/// Entropy rising linearly from start_entropy by slope per step.
struct Drift {
  std::int64_t start = 0;
  std::int64_t end = 0;
  double start_entropy = 1.0;
  double slope = 0.01;
  double jitter = 0.0;
};

/// Overlay: flattens the base distribution at [at_step, at_step + width).
struct SpikeInjection {
  std::int64_t at_step = 0;
  double magnitude = 3.0;  // in units of the local sigma
  std::int64_t width = 1;
};

/// Overlay: argmax cycles through `tokens` with the given period; the other
/// loop tokens carry secondary mass.
struct Loop {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::int64_t period = 2;
  std::vector<TokenId> tokens;
  double margin = 0.5;  // pre-temperature lead of the active token over the best non-loop token
};

/// Text reported as the token sampled at `at_step`.
struct TextCue {
  std::int64_t at_step = 0;
  std::string text;
};

/**
 * How spike targets are calibrated. The generator tracks its own window of
 * emitted entropies; a spike aims for the largest of mean + magnitude * sigma,
 * h_min + margin, and the entropy that lifts the n-point gradient to
 * g_min + margin. Defaults mirror the detector defaults.
 */
struct SpikeCalibration {
  std::size_t window = 10;
  std::size_t n_grad = 5;
  double h_min = 2.0;
  double g_min = 0.3;
  double margin = 0.1;

  static SpikeCalibration mirror(const ControllerConfig& c);
};

using BaseRegime = std::variant<Stable, Drift>;

struct Scenario {
  std::string name;
  std::size_t vocab_size = 64;
  std::int64_t length = 0;
  std::uint64_t seed = 0;
  std::vector<BaseRegime> regimes;  // must tile [0, length)
  std::vector<SpikeInjection> spikes;
  std::vector<Loop> loops;
  std::vector<TextCue> texts;
  std::optional<SpikeCalibration> calibration;

  /// Throws ConfigError.
  void validate() const;

  static Scenario from_json(const nlohmann::json& j);
  static Scenario from_file(const std::filesystem::path& path);
};

struct GroundTruth {
  std::int64_t length = 0;
  std::vector<std::int64_t> injected_spike_steps;             // onsets
  std::vector<std::pair<std::int64_t, std::int64_t>> loop_spans;  // [start, end)
};

struct GeneratedStream {
  std::vector<TraceRecord> records;
  std::vector<double> entropies;  // of the emitted f32 logits, nats
  std::vector<TokenId> argmax;    // greedy token at each step
  GroundTruth truth;
};

/// Deterministic in (scenario, seed). `seed` overrides scenario.seed;
/// `calibration` is used when the scenario has none.
GeneratedStream generate(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt,
                         const SpikeCalibration& calibration = {});

/// Temperature at which entropy(logits / T) equals `target` (nats).
double solve_temperature(std::span<const double> logits, double target, double tolerance = 1e-10);

struct Metrics {
  double precision = 1.0;
  double recall = 1.0;
  std::int64_t detections = 0;
  std::int64_t injections = 0;
  std::int64_t matched_detections = 0;
  std::int64_t matched_injections = 0;
  Summary summary;
  double max_entropy = 0.0;
};

/// A detection matches an injection within `tolerance_steps`. With no
/// detections precision is 1; with no injections recall is 1.
/// Throws InvalidInput if events and truth cover different lengths.
Metrics evaluate(const std::vector<EventRecord>& events, const GroundTruth& truth, std::int64_t tolerance_steps = 2);

nlohmann::json to_json(const Metrics& m);

}  // namespace spreg::harness
