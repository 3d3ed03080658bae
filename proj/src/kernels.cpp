#include "spreg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#ifdef SPREG_HAVE_OPENMP
#include <omp.h>
#endif

namespace spreg::kernels {

namespace {

std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

bool go_parallel(std::size_t n) { return n >= kParallelMinSize; }

struct ExpSums {
  double ties = 0.0;      // elements equal to the max, each exp(0) = 1
  double below = 0.0;     // sum exp(x - max) over the rest
  double weighted = 0.0;  // sum exp(x - max) * (x - max)

  double sum() const { return ties + below; }
  // ln(sum) via log1p so a near-one-hot vector keeps its tiny mass.
  double log_sum() const { return std::log1p((ties - 1.0) + below); }
};

}  // namespace

int threads_for(std::size_t n) {
#ifdef SPREG_HAVE_OPENMP
  return go_parallel(n) ? omp_get_max_threads() : 1;
#else
  (void)n;
  return 1;
#endif
}

double max_value(std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t blocks = block_count(n);
  std::vector<double> partial(blocks, -std::numeric_limits<double>::infinity());
  const double* data = x.data();

#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * kBlockSize;
    const std::size_t hi = std::min(n, lo + kBlockSize);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, data[i]);
    partial[b] = m;
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double p : partial) m = std::max(m, p);
  return m;
}

namespace {

ExpSums exp_sums(std::span<const double> x, double shift) {
  const std::size_t n = x.size();
  const std::size_t blocks = block_count(n);
  std::vector<ExpSums> partial(blocks);
  const double* data = x.data();

#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * kBlockSize;
    const std::size_t hi = std::min(n, lo + kBlockSize);
    ExpSums s;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = data[i] - shift;
      if (d == 0.0) {
        s.ties += 1.0;
        continue;
      }
      const double e = std::exp(d);
      s.below += e;
      s.weighted += e * d;
    }
    partial[b] = s;
  }
  ExpSums total;
  for (const auto& p : partial) {
    total.ties += p.ties;
    total.below += p.below;
    total.weighted += p.weighted;
  }
  return total;
}

}  // namespace

double logsumexp(std::span<const double> x) {
  const double m = max_value(x);
  return m + exp_sums(x, m).log_sum();
}

EntropyTerms entropy(std::span<const double> logits) {
  const double m = max_value(logits);
  const ExpSums s = exp_sums(logits, m);
  const double log_s = s.log_sum();
  // Both terms are non-negative. Underflowed entries contribute e * d = 0,
  // the 0 ln 0 = 0 limit.
  const double h = log_s - s.weighted / s.sum();
  return {std::max(h, 0.0), m + log_s};
}

void log_softmax(std::span<const double> logits, double log_normalizer, std::span<double> out) {
  const std::size_t n = logits.size();
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::size_t i = 0; i < n; ++i) out[i] = logits[i] - log_normalizer;
}

void divide(std::span<const double> x, double divisor, std::span<double> out) {
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] / divisor;
}

Moments moments(std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t blocks = block_count(n);
  const double* data = x.data();

  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * kBlockSize;
    const std::size_t hi = std::min(n, lo + kBlockSize);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += data[i];
    partial[b] = s;
  }
  double sum = 0.0;
  for (double p : partial) sum += p;
  const double mean = sum / static_cast<double>(n);

  // Two-pass variance: no cancellation from sum-of-squares.
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * kBlockSize;
    const std::size_t hi = std::min(n, lo + kBlockSize);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = data[i] - mean;
      s += d * d;
    }
    partial[b] = s;
  }
  double ss = 0.0;
  for (double p : partial) ss += p;
  return {mean, std::sqrt(ss / static_cast<double>(n))};
}

void guided_combine(std::span<const double> cond, std::span<const double> ref,
                    std::span<const double> weights, double lambda, std::span<double> out) {
  const std::size_t n = cond.size();
  if (weights.empty()) {
#pragma omp parallel for schedule(static) if (go_parallel(n))
    for (std::size_t i = 0; i < n; ++i) out[i] = ref[i] + lambda * (cond[i] - ref[i]);
  } else {
#pragma omp parallel for schedule(static) if (go_parallel(n))
    for (std::size_t i = 0; i < n; ++i) out[i] = ref[i] + lambda * weights[i] * (cond[i] - ref[i]);
  }
}

void mean_rows(Rows rows, std::span<double> out) {
  const std::size_t n = out.size();
  const std::size_t k = rows.size();
  const double inv = 1.0 / static_cast<double>(k);
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::size_t v = 0; v < n; ++v) {
    double s = 0.0;
    for (std::size_t r = 0; r < k; ++r) s += rows[r][v];
    out[v] = s * inv;
  }
}

void log_mean_exp_rows(Rows rows, std::span<double> out) {
  const std::size_t n = out.size();
  const std::size_t k = rows.size();
  const double log_k = std::log(static_cast<double>(k));
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::size_t v = 0; v < n; ++v) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < k; ++r) m = std::max(m, rows[r][v]);
    double s = 0.0;
    for (std::size_t r = 0; r < k; ++r) s += std::exp(rows[r][v] - m);
    out[v] = m + std::log(s) - log_k;
  }
}

namespace reference {

double max_value(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  return m;
}

double logsumexp(std::span<const double> x) {
  const double m = max_value(x);
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

EntropyTerms entropy(std::span<const double> logits) {
  const double lse = logsumexp(logits);
  double h = 0.0;
  for (double v : logits) {
    const double lp = v - lse;
    const double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return {h, lse};
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  const double lse = logsumexp(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

Moments moments(std::span<const double> x) {
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(x.size()))};
}

void guided_combine(std::span<const double> cond, std::span<const double> ref,
                    std::span<const double> weights, double lambda, std::span<double> out) {
  for (std::size_t i = 0; i < cond.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    out[i] = ref[i] + lambda * w * (cond[i] - ref[i]);
  }
}

void mean_rows(Rows rows, std::span<double> out) {
  for (std::size_t v = 0; v < out.size(); ++v) {
    double s = 0.0;
    for (const auto& row : rows) s += row[v];
    out[v] = s / static_cast<double>(rows.size());
  }
}

void log_mean_exp_rows(Rows rows, std::span<double> out) {
  for (std::size_t v = 0; v < out.size(); ++v) {
    double s = 0.0;
    for (const auto& row : rows) s += std::exp(row[v]);
    out[v] = std::log(s / static_cast<double>(rows.size()));
  }
}

}  // namespace reference

}  // namespace spreg::kernels
