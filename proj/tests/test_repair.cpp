#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "spreg/errors.hpp"
#include "spreg/repair.hpp"

using namespace spreg;

namespace {

std::vector<double> probs(const LogitVector& z) {
  const auto p = softmax(z);
  return {p.values().begin(), p.values().end()};
}

}  // namespace

TEST_CASE("reference pool records only below-mean distributions") {
  ReferencePool pool(32);
  const auto lp = log_softmax(LogitVector({2.0, 0.0, 1.0}));
  CHECK(pool.record(lp, 1.5, 2.0));
  CHECK_FALSE(pool.record(lp, 2.5, 2.0));
  CHECK_FALSE(pool.record(lp, 2.0, 2.0));
  CHECK(pool.size() == 1);
}

TEST_CASE("reference pool evicts oldest first") {
  ReferencePool pool(32);
  for (int i = 0; i < 33; ++i) {
    pool.record(log_softmax(LogitVector({static_cast<double>(i), 0.0})), 0.1 * i, 10.0);
  }
  CHECK(pool.size() == 32);
  const auto h = pool.entropies();
  CHECK(h.front() == doctest::Approx(0.1));
  CHECK(h.back() == doctest::Approx(3.2));
}

TEST_CASE("synthesize_reference examples") {
  ReferencePool empty(4);
  const auto u = synthesize_reference(empty, 4);
  for (double v : u.values()) CHECK(v == doctest::Approx(-std::log(4.0)).epsilon(1e-15));

  ReferencePool one(4);
  const auto d = log_softmax(LogitVector({1.0, 3.0, -2.0}));
  one.record(d, 0.1, 1.0);
  const auto r1 = synthesize_reference(one, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r1[i] == doctest::Approx(d[i]).epsilon(1e-14));

  for (auto agg : {PoolAggregation::LogMean, PoolAggregation::ProbMean}) {
    ReferencePool two(4);
    two.record(log_softmax(LogitVector({2.0, 0.0})), 0.1, 1.0);
    two.record(log_softmax(LogitVector({0.0, 2.0})), 0.1, 1.0);
    const auto r = synthesize_reference(two, 2, agg);
    CHECK(r[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
    CHECK(r[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  }
}

TEST_CASE("record_logits matches record of log_softmax") {
  ReferencePool a(4), b(4);
  const std::vector<double> z{0.5, -1.0, 2.0, 0.25};
  a.record(log_softmax(LogitVector(z)), 0.2, 1.0);
  b.record_logits(z, logsumexp(z), 0.2, 1.0);
  CHECK(a.entries()[0][2] == doctest::Approx(b.entries()[0][2]).epsilon(1e-15));
}

TEST_CASE("adaptive scale examples") {
  const GuidanceTable table;
  const RepairParams p;
  // 1.5 * (1 + 0.5 * (3 - 2) / 2) = 1.875 once the guard is dropped
  RepairParams no_guard;
  no_guard.epsilon = 0.0;
  CHECK(std::abs(adaptive_scale(3.0, 2.0, StepType::Reasoning, 0, table, no_guard) - 1.875) < 1e-12);
  // with the default guard: 1.5 * (1 + 0.5 / 2.000001)
  const long double guarded = 1.5L * (1.0L + 0.5L / (2.0L + 1e-6L));
  CHECK(std::abs(adaptive_scale(3.0, 2.0, StepType::Reasoning, 0, table, p) - static_cast<double>(guarded)) < 1e-12);
  CHECK(adaptive_scale(2.0, 2.0, StepType::Reasoning, 0, table, p) == doctest::Approx(1.5).epsilon(1e-12));
  const auto capped = adaptive_scale_breakdown(10.0, 2.0, StepType::Reasoning, 0, table, p);
  CHECK(capped.unclamped == doctest::Approx(4.5).epsilon(1e-6));
  CHECK(capped.applied == 3.0);
  // floor at 1: H well below mu
  const auto low = adaptive_scale_breakdown(0.1, 2.0, StepType::Reasoning, 3, table, p);
  CHECK(low.unclamped < 1.0);
  CHECK(low.applied == 1.0);
}

TEST_CASE("adaptive scale decays exactly by 1/(1+r) before clamping") {
  const GuidanceTable table;
  const RepairParams p;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int i = 0; i < 1000; ++i) {
    const double h = u(rng), mu = u(rng) + 0.01;
    const auto st = static_cast<StepType>(i % 4);
    const double base = adaptive_scale_breakdown(h, mu, st, 0, table, p).unclamped;
    for (int r = 1; r < 6; ++r) {
      const double v = adaptive_scale_breakdown(h, mu, st, r, table, p).unclamped;
      REQUIRE(v == base / (1.0 + r));
    }
  }
}

TEST_CASE("adaptive scale is non-decreasing in entropy") {
  const GuidanceTable table;
  const RepairParams p;
  double prev = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double h = 0.005 * i;
    const double v = adaptive_scale(h, 1.7, StepType::Action, 1, table, p);
    REQUIRE(v >= prev);
    REQUIRE(v <= p.lambda_max);
    prev = v;
  }
  CHECK(prev == p.lambda_max);
}

TEST_CASE("token weight examples") {
  RepairParams p;
  const std::vector<double> ref{1.0, 1.0, 4.0};
  // mean 2, population sigma sqrt(2); w = 1 + 0.05 * (x - 2) / sqrt(2)
  const auto w = token_weights(ref, 0.5, p);
  CHECK(w[0] == doctest::Approx(0.964644661).epsilon(1e-7));
  CHECK(w[1] == doctest::Approx(0.964644661).epsilon(1e-7));
  CHECK(w[2] == doctest::Approx(1.070710678).epsilon(1e-7));

  const std::vector<double> flat{3.0, 3.0, 3.0};
  for (double v : token_weights(flat, 0.9, p)) CHECK(v == 1.0);
  p.eta = 0.0;
  for (double v : token_weights(ref, 0.9, p)) CHECK(v == 1.0);
}

TEST_CASE("token weights average to one") {
  std::mt19937_64 rng(12);
  const RepairParams p;
  for (int i = 0; i < 1000; ++i) {
    const auto ref = oracle::normal_vector(rng, 2 + i % 300, 0.1 + i % 11);
    const auto w = token_weights(ref, 0.01 * (i % 100), p);
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    REQUIRE(std::abs(mean - 1.0) < 1e-9);
  }
}

TEST_CASE("guided logits examples") {
  const LogitVector cond({2.0, 0.0});
  const auto ref = log_softmax(LogitVector({1.0, 1.0}));
  const auto g = guided_logits(cond, ref, 2.0);
  CHECK(g[0] == doctest::Approx(0.439291).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(-3.560709).epsilon(1e-6));
  const auto p = probs(g);
  CHECK(p[0] == doctest::Approx(0.98200).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(0.01800).epsilon(1e-3));

  CHECK_THROWS_AS(guided_logits(cond, log_softmax(LogitVector({1.0, 1.0, 1.0})), 2.0), InvalidInput);
  CHECK_THROWS_AS(guided_logits(cond, ref, -0.5), InvalidInput);
}

TEST_CASE("guided logits identities on random pairs") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + i % 64;
    const LogitVector c(oracle::normal_vector(rng, n, 2.0));
    const LogitVector u(oracle::normal_vector(rng, n, 2.0));
    const auto ref = log_softmax(u);
    const auto pc = probs(c), pr = probs(u);
    const auto p1 = probs(guided_logits(c, ref, 1.0));
    const auto p0 = probs(guided_logits(c, ref, 0.0));
    for (std::size_t v = 0; v < n; ++v) {
      REQUIRE(std::abs(p1[v] - pc[v]) < 1e-9);
      REQUIRE(std::abs(p0[v] - pr[v]) < 1e-9);
    }
    const double gamma = 0.5 + 0.01 * (i % 300);
    const auto a = log_softmax(standard_cfg(c, u, gamma));
    const auto b = log_softmax(guided_logits(c, ref, gamma));
    for (std::size_t v = 0; v < n; ++v) REQUIRE(std::abs(a[v] - b[v]) < 1e-9);
    // Reversed direction swaps the roles.
    const auto rev = probs(guided_logits(c, ref, 1.0, {}, GuidanceDirection::TowardReference));
    for (std::size_t v = 0; v < n; ++v) REQUIRE(std::abs(rev[v] - pr[v]) < 1e-9);
  }
}

TEST_CASE("standard cfg examples") {
  const LogitVector c({2.0, 0.0}), u({1.0, 1.0});
  const auto same = probs(standard_cfg(c, u, 1.0));
  CHECK(same[0] == doctest::Approx(0.880797).epsilon(1e-6));
  const auto g = standard_cfg(c, u, 2.0);
  CHECK(g[0] == doctest::Approx(0.439291).epsilon(1e-6));
  const auto eq = probs(standard_cfg(c, c, 5.0));
  CHECK(eq[0] == doctest::Approx(0.880797).epsilon(1e-6));
}

TEST_CASE("repetition penalty branches") {
  const LogitVector z({2.6, -1.0, 0.0, 0.7});
  const std::vector<TokenId> recent{0, 1, 2, 2, 99, -3};
  const auto out = repetition_penalty(z, recent, 1.3);
  CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(-1.3).epsilon(1e-15));
  CHECK(out[2] == 0.0);
  CHECK(out[3] == z[3]);  // untouched, bit-identical
}

TEST_CASE("repetition penalty preserves signs and leaves other tokens bit-identical") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<TokenId> id(0, 49);
  for (int i = 0; i < 500; ++i) {
    const LogitVector z(oracle::normal_vector(rng, 50, 3.0));
    std::vector<TokenId> recent;
    for (int k = 0; k < 10; ++k) recent.push_back(id(rng));
    const auto out = repetition_penalty(z, recent, 1.0 + 0.01 * (i % 100) + 0.01);
    for (TokenId v = 0; v < 50; ++v) {
      const bool hit = std::find(recent.begin(), recent.end(), v) != recent.end();
      if (!hit) REQUIRE(out[v] == z[v]);
      REQUIRE(std::signbit(out[v]) == std::signbit(z[v]));
      if (hit && z[v] != 0.0) REQUIRE(std::abs(out[v]) != std::abs(z[v]));
    }
  }
}

TEST_CASE("recent tokens window") {
  RecentTokens r(64);
  for (int i = 0; i < 65; ++i) r.push(i);
  CHECK_FALSE(r.contains(0));
  CHECK(r.contains(1));
  CHECK(r.contains(64));
  CHECK(r.size() == 64);
  RecentTokens d(3);
  for (int v : {7, 7, 8, 7}) d.push(v);
  CHECK(d.contains(7));
  d.push(9);
  d.push(9);
  CHECK_FALSE(d.contains(8));
  CHECK(d.contains(7));
}

TEST_CASE("aggressive recovery") {
  const RepairParams p;
  const LogitVector cond({1.5, 0.2, -0.3, 0.9});
  const auto ref = log_softmax(LogitVector({0.1, 0.0, 0.3, -0.2}));
  const double hn = normalized_entropy(shannon_entropy(cond), 4);

  const auto plain = aggressive_recover(cond, ref, {}, hn, p);
  const auto w = token_weights(ref.values(), hn, p);
  CHECK(plain.logits == guided_logits(cond, ref, p.lambda_max, w));
  CHECK(plain.temperature == 0.3);
  CHECK(plain.lambda == p.lambda_max);
  CHECK(shannon_entropy(apply_temperature(plain.logits, 0.3)) < shannon_entropy(plain.logits));

  const std::vector<TokenId> recent{0};
  const auto rec = aggressive_recover(cond, ref, recent, hn, p);
  CHECK(rec.logits == repetition_penalty(plain.logits, recent, p.rho));
}

TEST_CASE("repair params validation") {
  RepairParams p;
  CHECK_NOTHROW(p.validate());
  p.rho = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.t_recover = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.pool_capacity = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
