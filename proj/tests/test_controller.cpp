#include <cmath>
#include <random>

#include <doctest.h>

#include "drive.hpp"
#include "oracles.hpp"
#include "spreg/controller.hpp"
#include "spreg/errors.hpp"

using namespace spreg;

namespace {

ControllerConfig config64() {
  ControllerConfig c;
  c.vocab_size = 64;
  return c;
}

LogitVector with_entropy(double h) { return LogitVector(oracle::logits_with_entropy(h, 64)); }

// Even steps 0.5, odd steps 1.5: mu = 1, sigma = 0.5 once the window is full.
std::vector<double> alternating(int n) {
  std::vector<double> h;
  for (int t = 0; t < n; ++t) h.push_back(t % 2 == 0 ? 0.5 : 1.5);
  return h;
}

StepResult feed(Controller& c, std::int64_t t, double h, const std::optional<LogitVector>& ref = {}) {
  std::optional<SampledToken> s;
  if (t > 0) s = SampledToken{static_cast<TokenId>(t % 64), ""};
  return c.process_step(t, with_entropy(h), ref, s);
}

}  // namespace

TEST_CASE("quiet steps pass the conditional logits through untouched") {
  Controller c(config64());
  std::mt19937_64 rng(3);
  for (std::int64_t t = 0; t < 40; ++t) {
    auto v = oracle::normal_vector(rng, 64, 1.0);
    v[static_cast<std::size_t>(t % 64)] += 10.0;  // peaked, so H stays under h_min
    const LogitVector z(std::move(v));
    const auto r = c.process_step(t, z);
    if (t > 0) c.notify_sampled(0, "x");
    INFO("t=", t, " H=", r.event.entropy, " mode=", to_string(r.event.mode));
    CHECK_FALSE(r.directive.intervened);
    CHECK_FALSE(r.directive.logits.has_value());
    CHECK_FALSE(r.directive.temperature_override.has_value());
    CHECK(&r.directive.logits_or(z) == &z);
    CHECK_FALSE(r.event.modified_entropy.has_value());
    CHECK(r.event.reference_source == ReferenceSource::NotApplicable);
  }
}

TEST_CASE("first step reports warm-up and no statistics") {
  Controller c(config64());
  const auto r = feed(c, 0, 1.0);
  CHECK(r.event.phase == "warmup");
  CHECK_FALSE(r.event.mu.has_value());
  CHECK_FALSE(r.event.sigma.has_value());
  CHECK_FALSE(r.event.gradient.has_value());
  CHECK(r.event.high_entropy_count == 0);
}

TEST_CASE("constructed spike matches the repair math step by step") {
  Controller c(config64());
  const auto h = alternating(20);
  for (int t = 0; t < 20; ++t) feed(c, t, h[static_cast<std::size_t>(t)]);
  REQUIRE(c.pool().size() == 9);
  const LogProbVector ref = synthesize_reference(c.pool(), 64);

  const LogitVector z = with_entropy(2.5);
  const auto r = c.process_step(20, z, std::nullopt, SampledToken{1, ""});
  const EventRecord& e = r.event;
  REQUIRE(e.spike);
  CHECK(e.phase == "monitoring");
  CHECK(*e.mu == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*e.sigma == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(*e.gradient == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(e.repair_duration == 2);  // severity (2.5 - 1.75) / 0.5 = 1.5
  CHECK(e.repair_index == 0);
  CHECK(e.reference_source == ReferenceSource::Pool);
  CHECK(e.mode == InterventionMode::Repair);

  const RepairParams rp;
  const double lambda = adaptive_scale(e.entropy, *e.mu, StepType::Reasoning, 0, GuidanceTable{}, rp);
  CHECK(*e.lambda_applied == lambda);
  // Reasoning: base 1.5, gamma 1; excess 1 + 0.5 * 1.5 / (1 + 1e-6).
  CHECK(lambda == doctest::Approx(1.5 * (1.0 + 0.75 / (1.0 + 1e-6))).epsilon(1e-9));
  const auto w = token_weights(ref.values(), normalized_entropy(e.entropy, 64), rp);
  const LogitVector expected = guided_logits(z, ref, lambda, w);
  REQUIRE(r.directive.logits.has_value());
  for (std::size_t i = 0; i < 64; ++i) CHECK((*r.directive.logits)[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  CHECK(*e.modified_entropy == doctest::Approx(shannon_entropy(expected)).epsilon(1e-12));

  const auto next = feed(c, 21, 0.5);
  CHECK(next.event.phase == "repairing");
  CHECK(next.event.mode == InterventionMode::Repair);
  CHECK_FALSE(next.event.spike);
  CHECK(next.event.repair_index == 0);
  CHECK(feed(c, 22, 1.5).event.phase == "cooldown");
  // Intervened steps never enter the pool, and 1.5 is above the mean.
  CHECK(c.pool().size() == 9);
}

TEST_CASE("reference source precedence: external, then pool, then uniform") {
  std::vector<double> ramp;
  for (int t = 0; t < 20; ++t) ramp.push_back(0.5 + 0.02 * t);

  Controller uni(config64());
  for (int t = 0; t < 20; ++t) feed(uni, t, ramp[static_cast<std::size_t>(t)]);
  REQUIRE(uni.pool().empty());
  const auto ru = feed(uni, 20, 2.5);
  REQUIRE(ru.event.spike);
  CHECK(ru.event.reference_source == ReferenceSource::Uniform);

  Controller ext(config64());
  const auto alt = alternating(20);
  for (int t = 0; t < 20; ++t) feed(ext, t, alt[static_cast<std::size_t>(t)]);
  REQUIRE_FALSE(ext.pool().empty());
  std::mt19937_64 rng(9);
  const LogitVector ext_logits(oracle::normal_vector(rng, 64, 1.0));
  const LogitVector z = with_entropy(2.5);
  const auto re = ext.process_step(20, z, ext_logits, SampledToken{1, ""});
  REQUIRE(re.event.spike);
  CHECK(re.event.reference_source == ReferenceSource::External);
  const auto lp = log_softmax(ext_logits);
  const auto w = token_weights(lp.values(), normalized_entropy(re.event.entropy, 64), RepairParams{});
  const auto expected = guided_logits(z, lp, *re.event.lambda_applied, w);
  for (std::size_t i = 0; i < 64; ++i) CHECK((*re.directive.logits)[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("sustained elevation triggers one aggressive recovery at low temperature") {
  Controller c(config64());
  int aggressive = 0;
  std::int64_t at = -1;
  for (std::int64_t t = 0; t < 100; ++t) {
    const double h = t < 5 ? 1.0 : 1.0 + 0.01 * static_cast<double>(t - 4);
    const auto r = feed(c, t, h);
    CHECK_FALSE(r.event.spike);
    if (r.event.mode == InterventionMode::Aggressive) {
      ++aggressive;
      at = t;
      CHECK(r.event.high_entropy_count == 50);
      CHECK(r.directive.temperature_override == 0.3);
      CHECK(*r.event.lambda_applied == 3.0);
      REQUIRE(r.directive.logits.has_value());
      const auto cooled = apply_temperature(*r.directive.logits, 0.3);
      CHECK(*r.event.modified_entropy == doctest::Approx(shannon_entropy(cooled)).epsilon(1e-12));
    }
    if (at >= 0 && t == at + 1) {
      CHECK(r.event.high_entropy_count == 1);
      CHECK(r.event.phase == "cooldown");
    }
  }
  CHECK(aggressive == 1);
  CHECK(at == 54);
}

TEST_CASE("sampled tokens feed the recent list and the plan tracker") {
  Controller c(config64());
  for (int t = 0; t < 65; ++t) {
    c.process_step(t, with_entropy(1.0));
    c.notify_sampled(t, "tok ");
  }
  CHECK(c.recent().size() == 64);
  CHECK_FALSE(c.recent().contains(0));
  CHECK(c.recent().contains(1));
  CHECK(c.recent().contains(64));

  c.process_step(65, with_entropy(1.0));
  c.notify_sampled(std::nullopt, "Therefore, the answer");
  const auto r = c.process_step(66, with_entropy(1.0));
  c.notify_sampled(std::nullopt, "");
  CHECK(r.event.step_type == StepType::Conclusion);
  CHECK(c.step_type() == StepType::Conclusion);
  CHECK(c.recent().size() == 64);
}

TEST_CASE("protocol violations throw and leave the controller usable") {
  Controller c(config64());
  CHECK_THROWS_AS(c.notify_sampled(1, "a"), ProtocolError);
  CHECK_THROWS_AS(c.process_step(0, with_entropy(1.0), std::nullopt, SampledToken{1, "a"}), ProtocolError);
  CHECK_THROWS_AS(c.process_step(1, with_entropy(1.0)), ProtocolError);
  c.process_step(0, with_entropy(1.0));
  CHECK_THROWS_AS(c.process_step(2, with_entropy(1.0)), ProtocolError);
  CHECK_THROWS_AS(c.process_step(1, LogitVector({1.0, 2.0})), InvalidInput);
  CHECK_THROWS_AS(c.process_step(1, with_entropy(1.0), LogitVector({1.0, 2.0})), InvalidInput);
  c.notify_sampled(3, "a");
  CHECK_THROWS_AS(c.notify_sampled(3, "a"), ProtocolError);
  CHECK_THROWS_AS(c.process_step(1, with_entropy(1.0), std::nullopt, SampledToken{1, "a"}), ProtocolError);
  CHECK(c.finish().total_steps == 1);
  const auto r = c.process_step(1, with_entropy(1.0));
  CHECK(r.event.t == 1);
  CHECK(c.window().size() == 2);
  CHECK(c.recent().size() == 1);
}

TEST_CASE("configuration is validated at construction") {
  ControllerConfig c;
  c.vocab_size = 1;
  CHECK_THROWS_AS(Controller{c}, ConfigError);
  c.vocab_size = 64;
  c.monitor.window = 0;
  CHECK_THROWS_AS(Controller{c}, ConfigError);
  c.monitor.window = 10;
  c.monitor.entropy_base = 1.0;
  CHECK_THROWS_AS(Controller{c}, ConfigError);
  c.monitor.entropy_base = kNaturalBase;
  c.patterns = nullptr;
  CHECK_THROWS_AS(Controller{c}, ConfigError);
}

TEST_CASE("entropy base changes reported units") {
  ControllerConfig cfg = config64();
  cfg.monitor.entropy_base = 2.0;
  Controller c(cfg);
  const LogitVector z = with_entropy(1.3);
  const auto r = c.process_step(0, z);
  CHECK(r.event.entropy == doctest::Approx(shannon_entropy(z) / std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("summary equals a recount of the events") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = drive::random_sequence(rng);
    ControllerConfig cfg = drive::random_config(rng);
    cfg.vocab_size = 64;
    Controller c(cfg);
    std::vector<EventRecord> events;
    for (std::size_t t = 0; t < h.size(); ++t) events.push_back(feed(c, static_cast<std::int64_t>(t), h[t]).event);
    const Summary s = c.finish();
    CHECK(s == summarize(events));
    std::int64_t spikes = 0, repair_steps = 0, aggressive = 0;
    double sum = 0.0;
    for (const auto& e : events) {
      spikes += e.spike;
      repair_steps += e.mode == InterventionMode::Repair;
      aggressive += e.mode == InterventionMode::Aggressive;
      sum += e.entropy;
    }
    CHECK(s.total_steps == static_cast<std::int64_t>(h.size()));
    CHECK(s.spikes == spikes);
    CHECK(s.repairs == spikes);
    CHECK(s.repair_steps == repair_steps);
    CHECK(s.aggressive == aggressive);
    CHECK(s.mean_entropy == doctest::Approx(sum / static_cast<double>(h.size())).epsilon(1e-12));
  }
}

TEST_CASE("interleaved controllers do not share state") {
  std::mt19937_64 rng(5);
  const auto a = drive::random_sequence(rng);
  const auto b = drive::random_sequence(rng);
  const auto solo_a = drive::run(a, config64());
  const auto solo_b = drive::run(b, config64());

  Controller ca(config64()), cb(config64());
  std::vector<EventRecord> ea, eb;
  for (std::size_t t = 0; t < std::max(a.size(), b.size()); ++t) {
    if (t < a.size()) ea.push_back(feed(ca, static_cast<std::int64_t>(t), a[t]).event);
    if (t < b.size()) eb.push_back(feed(cb, static_cast<std::int64_t>(t), b[t]).event);
  }
  CHECK(ea == solo_a.events);
  CHECK(eb == solo_b.events);
}
