#pragma once

// Distributions over a token vocabulary. All math runs in double precision;
// f32 logits from inference stacks are widened on ingest.

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace spreg {

using TokenId = std::int32_t;

/// Natural log base; entropies are in nats unless a config says otherwise.
inline constexpr double kNaturalBase = std::numbers::e;

/// Dense finite scores over a vocabulary of at least two tokens.
class LogitVector {
 public:
  explicit LogitVector(std::vector<double> values);

  static LogitVector from_f32(std::span<const float> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  std::vector<float> to_f32() const;

  friend bool operator==(const LogitVector&, const LogitVector&) = default;

 private:
  std::vector<double> values_;
};

/// Normalized log-probabilities: logsumexp(values) == 0.
class LogProbVector {
 public:
  /// Validates normalization to 1e-9.
  explicit LogProbVector(std::vector<double> values);

  /// Uniform distribution, every entry -ln|V|.
  static LogProbVector uniform(std::size_t vocab_size);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  /// Reinterprets the log-probabilities as logits (they are valid ones).
  LogitVector as_logits() const { return LogitVector(values_); }

 private:
  struct Trusted {};
  LogProbVector(Trusted, std::vector<double> values) : values_(std::move(values)) {}

  friend LogProbVector log_softmax(const LogitVector& z);
  friend LogProbVector log_softmax_span(std::span<const double> z);

  std::vector<double> values_;
};

class ProbVector {
 public:
  /// Validates entries in [0, 1] summing to 1 within 1e-9.
  explicit ProbVector(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<double> values_;
};

LogProbVector log_softmax(const LogitVector& z);
/// Same as log_softmax() for an already validated span.
LogProbVector log_softmax_span(std::span<const double> z);
ProbVector softmax(const LogitVector& z);
double logsumexp(std::span<const double> z);

/// H = -sum p ln p over softmax(z), in nats.
double shannon_entropy(const LogitVector& z);
double shannon_entropy(const LogProbVector& lp);
double shannon_entropy(std::span<const double> z);

/// Converts an entropy in nats to the given log base.
double entropy_in_base(double nats, double base);

/// H / ln|V|, in [0, 1].
double normalized_entropy(double entropy_nats, std::size_t vocab_size);

/// z / T. Lower temperature sharpens.
LogitVector apply_temperature(const LogitVector& z, double temperature);

}  // namespace spreg
