#include "spreg/distributions.hpp"

#include <cmath>
#include <string>

#include "spreg/errors.hpp"
#include "spreg/kernels.hpp"

namespace spreg {

namespace {

void require_vocab(std::size_t n) {
  if (n < 2) throw InvalidInput("vocabulary must have at least 2 entries, got " + std::to_string(n));
}

}  // namespace

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  require_vocab(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw InvalidInput("non-finite logit at index " + std::to_string(i));
    }
  }
}

LogitVector LogitVector::from_f32(std::span<const float> values) {
  return LogitVector(std::vector<double>(values.begin(), values.end()));
}

std::vector<float> LogitVector::to_f32() const {
  return std::vector<float>(values_.begin(), values_.end());
}

LogProbVector::LogProbVector(std::vector<double> values) : values_(std::move(values)) {
  require_vocab(values_.size());
  for (double v : values_) {
    if (std::isnan(v) || v > 1e-12) throw InvalidInput("log-probability out of range");
  }
  const double lse = kernels::logsumexp(values_);
  if (!(std::abs(lse) <= 1e-9)) throw InvalidInput("log-probabilities are not normalized");
}

LogProbVector LogProbVector::uniform(std::size_t vocab_size) {
  require_vocab(vocab_size);
  return LogProbVector(Trusted{}, std::vector<double>(vocab_size, -std::log(static_cast<double>(vocab_size))));
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
  require_vocab(values_.size());
  double sum = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("probability out of [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("probabilities do not sum to 1");
}

LogProbVector log_softmax_span(std::span<const double> z) {
  std::vector<double> out(z.size());
  kernels::log_softmax(z, kernels::logsumexp(z), out);
  return LogProbVector(LogProbVector::Trusted{}, std::move(out));
}

LogProbVector log_softmax(const LogitVector& z) { return log_softmax_span(z.values()); }

ProbVector softmax(const LogitVector& z) {
  const double lse = kernels::logsumexp(z.values());
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - lse);
  return ProbVector(std::move(p));
}

double logsumexp(std::span<const double> z) { return kernels::logsumexp(z); }

double shannon_entropy(std::span<const double> z) { return kernels::entropy(z).entropy; }

double shannon_entropy(const LogitVector& z) { return shannon_entropy(z.values()); }

double shannon_entropy(const LogProbVector& lp) { return shannon_entropy(lp.values()); }

double entropy_in_base(double nats, double base) {
  if (!(base > 1.0)) throw InvalidInput("entropy log base must exceed 1");
  if (base == kNaturalBase) return nats;
  return nats / std::log(base);
}

double normalized_entropy(double entropy_nats, std::size_t vocab_size) {
  if (vocab_size < 2) throw InvalidInput("normalized entropy needs vocab_size >= 2");
  if (!(entropy_nats >= 0.0)) throw InvalidInput("entropy must be non-negative");
  return entropy_nats / std::log(static_cast<double>(vocab_size));
}

LogitVector apply_temperature(const LogitVector& z, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidInput("temperature must be positive");
  }
  std::vector<double> out(z.size());
  kernels::divide(z.values(), temperature, out);
  return LogitVector(std::move(out));
}

}  // namespace spreg
