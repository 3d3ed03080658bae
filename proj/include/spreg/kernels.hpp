#pragma once

// Vocabulary-sized numeric kernels.
//
// The top-level functions are the production path: reductions are split into
// fixed-size blocks whose partials are combined serially in block order, so the
// result depends only on the input length and never on the thread count. Blocks
// run under OpenMP once the vector is long enough to amortize the fork.
//
// `kernels::reference` holds straightforward single-loop versions of the same
// math. They exist for tests and the benchmark.

#include <cstddef>
#include <span>

namespace spreg::kernels {

inline constexpr std::size_t kBlockSize = 4096;
inline constexpr std::size_t kParallelMinSize = 16384;

struct EntropyTerms {
  double entropy;         // nats
  double log_normalizer;  // logsumexp of the input
};

struct Moments {
  double mean;
  double stddev;  // population
};

using Rows = std::span<const std::span<const double>>;

double max_value(std::span<const double> x);
double logsumexp(std::span<const double> x);
EntropyTerms entropy(std::span<const double> logits);
void log_softmax(std::span<const double> logits, double log_normalizer, std::span<double> out);
void divide(std::span<const double> x, double divisor, std::span<double> out);
Moments moments(std::span<const double> x);
// out = ref + lambda * w * (cond - ref); empty `weights` means all ones.
void guided_combine(std::span<const double> cond, std::span<const double> ref,
                    std::span<const double> weights, double lambda, std::span<double> out);
void mean_rows(Rows rows, std::span<double> out);
// out[v] = log(mean_k exp(rows[k][v]))
void log_mean_exp_rows(Rows rows, std::span<double> out);

/// Number of threads the blocked kernels would use for a vector of length n.
int threads_for(std::size_t n);

namespace reference {

double max_value(std::span<const double> x);
double logsumexp(std::span<const double> x);
EntropyTerms entropy(std::span<const double> logits);
void log_softmax(std::span<const double> logits, std::span<double> out);
Moments moments(std::span<const double> x);
void guided_combine(std::span<const double> cond, std::span<const double> ref,
                    std::span<const double> weights, double lambda, std::span<double> out);
void mean_rows(Rows rows, std::span<double> out);
void log_mean_exp_rows(Rows rows, std::span<double> out);

}  // namespace reference

}  // namespace spreg::kernels
