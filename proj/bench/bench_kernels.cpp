// Blocked (optionally OpenMP-parallel) kernels against the serial reference
// versions, plus the controller's per-step cost, at LLM vocabulary sizes.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "spreg/controller.hpp"
#include "spreg/kernels.hpp"

namespace {

std::vector<double> random_logits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void BM_Entropy(benchmark::State& st) {
  const auto z = random_logits(static_cast<std::size_t>(st.range(0)), 1);
  for (auto _ : st) benchmark::DoNotOptimize(spreg::kernels::entropy(z));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_EntropyReference(benchmark::State& st) {
  const auto z = random_logits(static_cast<std::size_t>(st.range(0)), 1);
  for (auto _ : st) benchmark::DoNotOptimize(spreg::kernels::reference::entropy(z));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_LogSoftmax(benchmark::State& st) {
  const auto z = random_logits(static_cast<std::size_t>(st.range(0)), 2);
  std::vector<double> out(z.size());
  for (auto _ : st) {
    spreg::kernels::log_softmax(z, spreg::kernels::logsumexp(z), out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_LogSoftmaxReference(benchmark::State& st) {
  const auto z = random_logits(static_cast<std::size_t>(st.range(0)), 2);
  std::vector<double> out(z.size());
  for (auto _ : st) {
    spreg::kernels::reference::log_softmax(z, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_GuidedCombine(benchmark::State& st) {
  const auto c = random_logits(static_cast<std::size_t>(st.range(0)), 3);
  const auto r = random_logits(c.size(), 4);
  const auto w = random_logits(c.size(), 5);
  std::vector<double> out(c.size());
  for (auto _ : st) {
    spreg::kernels::guided_combine(c, r, w, 1.7, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_GuidedCombineReference(benchmark::State& st) {
  const auto c = random_logits(static_cast<std::size_t>(st.range(0)), 3);
  const auto r = random_logits(c.size(), 4);
  const auto w = random_logits(c.size(), 5);
  std::vector<double> out(c.size());
  for (auto _ : st) {
    spreg::kernels::reference::guided_combine(c, r, w, 1.7, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_Moments(benchmark::State& st) {
  const auto z = random_logits(static_cast<std::size_t>(st.range(0)), 6);
  for (auto _ : st) benchmark::DoNotOptimize(spreg::kernels::moments(z));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_MomentsReference(benchmark::State& st) {
  const auto z = random_logits(static_cast<std::size_t>(st.range(0)), 6);
  for (auto _ : st) benchmark::DoNotOptimize(spreg::kernels::reference::moments(z));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

// Alternating calm and flat steps so repairs fire regularly.
void BM_ControllerStep(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  spreg::ControllerConfig cfg;
  cfg.vocab_size = n;
  cfg.detector.t_cool = 3;
  std::vector<spreg::LogitVector> steps;
  for (int k = 0; k < 16; ++k) {
    auto z = random_logits(n, 10 + static_cast<std::uint64_t>(k));
    const double sharp = (k % 8 == 7) ? 0.05 : 3.0;
    for (auto& x : z) x *= sharp;
    steps.emplace_back(std::move(z));
  }
  std::int64_t t = 0;
  spreg::Controller ctrl(cfg);
  for (auto _ : st) {
    auto r = ctrl.process_step(t, steps[static_cast<std::size_t>(t % 16)], std::nullopt,
                               t > 0 ? std::optional<spreg::SampledToken>(spreg::SampledToken{1, " x"}) : std::nullopt);
    benchmark::DoNotOptimize(r);
    ++t;
  }
  st.SetItemsProcessed(st.iterations());
}

#define SPREG_SIZES ->Arg(32768)->Arg(65536)->Arg(152064)

BENCHMARK(BM_Entropy) SPREG_SIZES;
BENCHMARK(BM_EntropyReference) SPREG_SIZES;
BENCHMARK(BM_LogSoftmax) SPREG_SIZES;
BENCHMARK(BM_LogSoftmaxReference) SPREG_SIZES;
BENCHMARK(BM_GuidedCombine) SPREG_SIZES;
BENCHMARK(BM_GuidedCombineReference) SPREG_SIZES;
BENCHMARK(BM_Moments) SPREG_SIZES;
BENCHMARK(BM_MomentsReference) SPREG_SIZES;
BENCHMARK(BM_ControllerStep) SPREG_SIZES;

}  // namespace

BENCHMARK_MAIN();
