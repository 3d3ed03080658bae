#include "spreg/repair.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spreg/errors.hpp"
#include "spreg/kernels.hpp"

namespace spreg {

std::string_view to_string(GuidanceDirection d) {
  return d == GuidanceDirection::TowardConditional ? "toward-conditional" : "toward-reference";
}

std::string_view to_string(PoolAggregation a) { return a == PoolAggregation::LogMean ? "log-mean" : "prob-mean"; }

void RepairParams::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("repair: " + what); };
  if (!std::isfinite(beta)) fail("beta must be finite");
  if (!(eta >= 0.0)) fail("eta must be >= 0");
  if (!(lambda_max >= 1.0)) fail("lambda_max must be >= 1");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (!(rho > 1.0)) fail("rho must be > 1");
  if (!(t_recover > 0.0 && t_recover <= 1.0)) fail("t_recover must be in (0, 1]");
  if (recent_window == 0) fail("recent_window must be positive");
  if (pool_capacity == 0) fail("pool_capacity must be positive");
}

ReferencePool::ReferencePool(std::size_t capacity) : slots_(capacity), slot_entropy_(capacity, 0.0) {
  if (capacity == 0) throw InvalidInput("reference pool capacity must be positive");
}

std::vector<double>& ReferencePool::claim_slot(double entropy) {
  auto& slot = slots_[head_];
  slot_entropy_[head_] = entropy;
  head_ = (head_ + 1) % slots_.size();
  count_ = std::min(count_ + 1, slots_.size());
  return slot;
}

bool ReferencePool::record(const LogProbVector& logprobs, double entropy, double mu) {
  if (!(entropy < mu)) return false;
  auto& slot = claim_slot(entropy);
  slot.assign(logprobs.values().begin(), logprobs.values().end());
  return true;
}

bool ReferencePool::record_logits(std::span<const double> logits, double log_normalizer, double entropy,
                                  double mu) {
  if (!(entropy < mu)) return false;
  auto& slot = claim_slot(entropy);
  slot.resize(logits.size());
  kernels::log_softmax(logits, log_normalizer, slot);
  return true;
}

std::vector<std::span<const double>> ReferencePool::entries() const {
  std::vector<std::span<const double>> out;
  out.reserve(count_);
  const std::size_t cap = slots_.size();
  const std::size_t start = (head_ + cap - count_) % cap;
  for (std::size_t i = 0; i < count_; ++i) out.emplace_back(slots_[(start + i) % cap]);
  return out;
}

std::vector<double> ReferencePool::entropies() const {
  std::vector<double> out;
  const std::size_t cap = slots_.size();
  const std::size_t start = (head_ + cap - count_) % cap;
  for (std::size_t i = 0; i < count_; ++i) out.push_back(slot_entropy_[(start + i) % cap]);
  return out;
}

LogProbVector synthesize_reference(const ReferencePool& pool, std::size_t vocab_size, PoolAggregation aggregation) {
  if (pool.empty()) return LogProbVector::uniform(vocab_size);
  const auto rows = pool.entries();
  for (const auto& r : rows) {
    if (r.size() != vocab_size) throw InvalidInput("pool entry size does not match vocabulary");
  }
  std::vector<double> agg(vocab_size);
  if (aggregation == PoolAggregation::LogMean) {
    kernels::mean_rows(rows, agg);
  } else {
    kernels::log_mean_exp_rows(rows, agg);
  }
  return log_softmax_span(agg);
}

ScaleBreakdown adaptive_scale_breakdown(double entropy, double mu, StepType step, int repair_index,
                                        const GuidanceTable& table, const RepairParams& p) {
  if (repair_index < 0) throw InvalidInput("repair index must be >= 0");
  const auto g = guidance_params(step, table);
  const double excess = 1.0 + p.beta * (entropy - mu) / (mu + p.epsilon);
  // δ(r) = 1/(1+r), applied as a division so the decay ratio is exact.
  const double unclamped = g.lambda_base * excess * g.gamma_tau / (1.0 + static_cast<double>(repair_index));
  return {unclamped, std::max(std::min(unclamped, p.lambda_max), 1.0)};
}

double adaptive_scale(double entropy, double mu, StepType step, int repair_index, const GuidanceTable& table,
                      const RepairParams& p) {
  return adaptive_scale_breakdown(entropy, mu, step, repair_index, table, p).applied;
}

std::vector<double> token_weights(std::span<const double> reference, double h_norm, const RepairParams& p) {
  std::vector<double> w(reference.size(), 1.0);
  if (p.eta == 0.0 || h_norm == 0.0 || reference.empty()) return w;
  const auto m = kernels::moments(reference);
  const double gain = p.eta * h_norm / (m.stddev + p.epsilon);
  for (std::size_t v = 0; v < reference.size(); ++v) w[v] = 1.0 + gain * (reference[v] - m.mean);
  return w;
}

LogitVector guided_logits(const LogitVector& cond, const LogProbVector& ref, double lambda,
                          std::span<const double> weights, GuidanceDirection direction) {
  if (cond.size() != ref.size()) throw InvalidInput("conditional and reference sizes differ");
  if (!weights.empty() && weights.size() != cond.size()) throw InvalidInput("weight vector size mismatch");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("guidance scale must be finite and >= 0");

  const LogProbVector lc = log_softmax(cond);
  std::vector<double> out(cond.size());
  if (direction == GuidanceDirection::TowardConditional) {
    kernels::guided_combine(lc.values(), ref.values(), weights, lambda, out);
  } else {
    kernels::guided_combine(ref.values(), lc.values(), weights, lambda, out);
  }
  return LogitVector(std::move(out));
}

LogitVector standard_cfg(const LogitVector& cond, const LogitVector& uncond, double gamma) {
  if (cond.size() != uncond.size()) throw InvalidInput("conditional and unconditional sizes differ");
  if (!std::isfinite(gamma)) throw InvalidInput("guidance scale must be finite");
  const LogProbVector lc = log_softmax(cond);
  const LogProbVector lu = log_softmax(uncond);
  std::vector<double> out(cond.size());
  kernels::guided_combine(lc.values(), lu.values(), {}, gamma, out);
  return LogitVector(std::move(out));
}

LogitVector repetition_penalty(const LogitVector& z, std::span<const TokenId> recent, double rho) {
  if (!(rho > 1.0)) throw InvalidInput("repetition penalty rho must be > 1");
  std::vector<double> out(z.values().begin(), z.values().end());
  std::vector<bool> done(z.size(), false);
  for (TokenId id : recent) {
    if (id < 0 || static_cast<std::size_t>(id) >= z.size()) continue;
    const auto v = static_cast<std::size_t>(id);
    if (done[v]) continue;
    done[v] = true;
    if (out[v] > 0.0) {
      out[v] /= rho;
    } else if (out[v] < 0.0) {
      out[v] *= rho;
    }
  }
  return LogitVector(std::move(out));
}

RecentTokens::RecentTokens(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InvalidInput("recent-token span must be positive");
}

void RecentTokens::push(TokenId id) {
  ids_.push_back(id);
  ++counts_[id];
  if (ids_.size() > capacity_) {
    const TokenId old = ids_.front();
    ids_.pop_front();
    if (--counts_[old] == 0) counts_.erase(old);
  }
}

bool RecentTokens::contains(TokenId id) const { return counts_.count(id) > 0; }

Recovery aggressive_recover(const LogitVector& cond, const LogProbVector& ref, std::span<const TokenId> recent,
                            double h_norm, const RepairParams& p) {
  const auto w = token_weights(ref.values(), h_norm, p);
  const LogitVector guided = guided_logits(cond, ref, p.lambda_max, w, p.direction);
  return {repetition_penalty(guided, recent, p.rho), p.t_recover, p.lambda_max};
}

}  // namespace spreg
