#pragma once

// Rectification math: reference-prior synthesis, adaptive guidance scale,
// token weighting, guided logits, standard CFG, and aggressive recovery.

#include <cstddef>
#include <deque>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spreg/distributions.hpp"
#include "spreg/plan_tracker.hpp"

namespace spreg {

/// Which way the guided logits move relative to the reference.
enum class GuidanceDirection {
  TowardConditional,  // ℓ_ref + λ·w·(ℓ_c − ℓ_ref): extrapolate away from the reference
  TowardReference,    // ℓ_c + λ·w·(ℓ_ref − ℓ_c)
};

enum class PoolAggregation {
  LogMean,   // mean of log-probabilities, renormalized
  ProbMean,  // log of the mean of probabilities
};

std::string_view to_string(GuidanceDirection d);
std::string_view to_string(PoolAggregation a);

struct RepairParams {
  double beta = 0.5;          // β, entropy-excess gain
  double eta = 0.1;           // η, token-weight gain
  double lambda_max = 3.0;    // λ_max
  double epsilon = 1e-6;      // ε
  double rho = 1.3;           // ρ, repetition penalty
  double t_recover = 0.3;     // recovery sampling temperature
  std::size_t recent_window = 64;
  std::size_t pool_capacity = 32;  // K
  GuidanceDirection direction = GuidanceDirection::TowardConditional;
  PoolAggregation aggregation = PoolAggregation::LogMean;

  /// Throws ConfigError.
  void validate() const;
};

/// Low-entropy history of log-probability vectors, evicted oldest first.
class ReferencePool {
 public:
  explicit ReferencePool(std::size_t capacity = 32);

  /// Stores `logprobs` iff entropy < mu. Returns whether it was stored.
  bool record(const LogProbVector& logprobs, double entropy, double mu);

  /// Same, computing log_softmax of `logits` into a recycled slot.
  bool record_logits(std::span<const double> logits, double log_normalizer, double entropy, double mu);

  std::size_t size() const noexcept { return count_; }
  std::size_t capacity() const noexcept { return slots_.size(); }
  bool empty() const noexcept { return count_ == 0; }

  /// Stored vectors, oldest first.
  std::vector<std::span<const double>> entries() const;
  /// Entropies of the stored vectors at recording time, oldest first.
  std::vector<double> entropies() const;

 private:
  std::vector<double>& claim_slot(double entropy);

  std::vector<std::vector<double>> slots_;
  std::vector<double> slot_entropy_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

/// Aggregated pool distribution; an empty pool gives the uniform distribution.
LogProbVector synthesize_reference(const ReferencePool& pool, std::size_t vocab_size,
                                   PoolAggregation aggregation = PoolAggregation::LogMean);

struct ScaleBreakdown {
  double unclamped;  // before the [1, λ_max] clamp
  double applied;
};

ScaleBreakdown adaptive_scale_breakdown(double entropy, double mu, StepType step, int repair_index,
                                        const GuidanceTable& table, const RepairParams& p);

/// min(λ_base(τ)·(1 + β(H − μ)/(μ + ε))·γ(τ)·δ(r), λ_max), floored at 1.
double adaptive_scale(double entropy, double mu, StepType step, int repair_index, const GuidanceTable& table,
                      const RepairParams& p);

/// w(v) = 1 + η·Ĥ·(ref(v) − μ_ref)/(σ_ref + ε). Any shift of `reference`
/// gives the same weights, so logits and log-probs are interchangeable.
std::vector<double> token_weights(std::span<const double> reference, double h_norm, const RepairParams& p);

/// Guided logits in log-softmax space. Empty `weights` means all ones.
/// Throws InvalidInput on a size mismatch or negative lambda.
LogitVector guided_logits(const LogitVector& cond, const LogProbVector& ref, double lambda,
                          std::span<const double> weights = {},
                          GuidanceDirection direction = GuidanceDirection::TowardConditional);

/// log P_uncond + γ(log P_cond − log P_uncond).
LogitVector standard_cfg(const LogitVector& cond, const LogitVector& uncond, double gamma);

/// Positive logits of recent tokens are divided by ρ, negative ones
/// multiplied by ρ; zeros and other tokens are left alone. Duplicate ids in
/// `recent` are applied once. Ids outside the vocabulary are ignored.
LogitVector repetition_penalty(const LogitVector& z, std::span<const TokenId> recent, double rho);

/// Bounded span of the most recently sampled tokens.
class RecentTokens {
 public:
  explicit RecentTokens(std::size_t capacity = 64);

  void push(TokenId id);
  bool contains(TokenId id) const;
  std::vector<TokenId> ids() const { return {ids_.begin(), ids_.end()}; }
  std::size_t size() const noexcept { return ids_.size(); }

 private:
  std::size_t capacity_;
  std::deque<TokenId> ids_;
  std::unordered_map<TokenId, int> counts_;
};

struct Recovery {
  LogitVector logits;  // not temperature-scaled; the host applies `temperature`
  double temperature;
  double lambda;
};

/// Guided logits at λ_max with token weights, then the repetition penalty.
Recovery aggressive_recover(const LogitVector& cond, const LogProbVector& ref, std::span<const TokenId> recent,
                            double h_norm, const RepairParams& p);

}  // namespace spreg
