#include "spreg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "spreg/errors.hpp"
#include "spreg/kernels.hpp"

namespace spreg::harness {

using nlohmann::json;

SpikeCalibration SpikeCalibration::mirror(const ControllerConfig& c) {
  SpikeCalibration s;
  s.window = c.monitor.window;
  s.n_grad = c.detector.n_grad;
  s.h_min = c.detector.h_min;
  s.g_min = c.detector.g_min;
  return s;
}

namespace {

std::int64_t regime_start(const BaseRegime& r) {
  return std::visit([](const auto& x) { return x.start; }, r);
}
std::int64_t regime_end(const BaseRegime& r) {
  return std::visit([](const auto& x) { return x.end; }, r);
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

}  // namespace

void Scenario::validate() const {
  if (vocab_size < 2) throw ConfigError("scenario: vocab_size must be >= 2");
  if (length < 1) throw ConfigError("scenario: length must be >= 1");
  const double h_cap = std::log(static_cast<double>(vocab_size));

  std::vector<BaseRegime> sorted = regimes;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return regime_start(a) < regime_start(b); });
  std::int64_t cursor = 0;
  for (const auto& r : sorted) {
    if (regime_start(r) != cursor) {
      throw ConfigError("scenario: base segments must tile [0, length) without gaps or overlap (at step " +
                        std::to_string(cursor) + ")");
    }
    if (regime_end(r) <= regime_start(r)) throw ConfigError("scenario: empty base segment");
    cursor = regime_end(r);
    auto check_h = [&](double h, const char* what) {
      if (!(h > 0.0) || !(h < h_cap)) {
        throw ConfigError(std::string("scenario: ") + what + " must lie in (0, ln|V|)");
      }
    };
    if (const auto* s = std::get_if<Stable>(&r)) {
      if (s->jitter < 0) throw ConfigError("scenario: jitter must be >= 0");
      check_h(s->target_entropy - s->jitter, "stable target - jitter");
      check_h(s->target_entropy + s->jitter, "stable target + jitter");
    } else {
      const auto& d = std::get<Drift>(r);
      if (d.jitter < 0) throw ConfigError("scenario: jitter must be >= 0");
      const double last = d.start_entropy + d.slope * static_cast<double>(d.end - d.start - 1);
      check_h(std::min(d.start_entropy, last) - d.jitter, "drift entropy");
      check_h(std::max(d.start_entropy, last) + d.jitter, "drift entropy");
    }
  }
  if (cursor != length) throw ConfigError("scenario: base segments end at " + std::to_string(cursor) +
                                          " but length is " + std::to_string(length));

  for (const auto& s : spikes) {
    if (s.width < 1) throw ConfigError("scenario: spike width must be >= 1");
    if (s.at_step < 0 || s.at_step + s.width > length) throw ConfigError("scenario: spike outside the stream");
    if (!(s.magnitude > 0)) throw ConfigError("scenario: spike magnitude must be > 0");
  }
  for (const auto& l : loops) {
    if (l.start < 0 || l.end > length || l.end <= l.start) throw ConfigError("scenario: loop outside the stream");
    if (l.period < 1 || static_cast<std::size_t>(l.period) != l.tokens.size()) {
      throw ConfigError("scenario: loop needs exactly `period` tokens");
    }
    for (TokenId id : l.tokens) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) throw ConfigError("scenario: loop token out of range");
    }
    if (!(l.margin > 0)) throw ConfigError("scenario: loop margin must be > 0");
  }
  for (const auto& c : texts) {
    if (c.at_step < 0 || c.at_step >= length) throw ConfigError("scenario: text cue outside the stream");
  }
  if (calibration && (calibration->window < 2 || calibration->n_grad < 2)) {
    throw ConfigError("scenario: calibration window and n_grad must be >= 2");
  }
}

Scenario Scenario::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  Scenario s;
  s.name = field_or<std::string>(j, "name", "", "scenario");
  s.vocab_size = field<std::size_t>(j, "vocab_size", "scenario");
  s.length = field<std::int64_t>(j, "length", "scenario");
  s.seed = field_or<std::uint64_t>(j, "seed", 0, "scenario");

  if (!j.contains("segments") || !j["segments"].is_array()) throw ConfigError("scenario: 'segments' must be an array");
  for (const auto& seg : j["segments"]) {
    const auto kind = field<std::string>(seg, "kind", "segment");
    const std::string where = "segment(" + kind + ")";
    if (kind == "stable") {
      s.regimes.push_back(Stable{field<std::int64_t>(seg, "start", where), field<std::int64_t>(seg, "end", where),
                                 field<double>(seg, "target_entropy", where),
                                 field_or<double>(seg, "jitter", 0.05, where)});
    } else if (kind == "drift") {
      s.regimes.push_back(Drift{field<std::int64_t>(seg, "start", where), field<std::int64_t>(seg, "end", where),
                                field<double>(seg, "start_entropy", where), field<double>(seg, "slope", where),
                                field_or<double>(seg, "jitter", 0.0, where)});
    } else if (kind == "spike") {
      s.spikes.push_back(SpikeInjection{field<std::int64_t>(seg, "at_step", where),
                                        field_or<double>(seg, "magnitude", 3.0, where),
                                        field_or<std::int64_t>(seg, "width", 1, where)});
    } else if (kind == "loop") {
      Loop l;
      l.start = field<std::int64_t>(seg, "start", where);
      l.end = field<std::int64_t>(seg, "end", where);
      l.period = field<std::int64_t>(seg, "period", where);
      l.tokens = field<std::vector<TokenId>>(seg, "tokens", where);
      l.margin = field_or<double>(seg, "margin", l.margin, where);
      s.loops.push_back(std::move(l));
    } else {
      throw ConfigError("scenario: unknown segment kind '" + kind + "'");
    }
  }
  if (j.contains("texts")) {
    for (const auto& c : j["texts"]) {
      s.texts.push_back(TextCue{field<std::int64_t>(c, "at_step", "text"), field<std::string>(c, "text", "text")});
    }
  }
  if (j.contains("calibration")) {
    const auto& c = j["calibration"];
    SpikeCalibration cal;
    cal.window = field_or<std::size_t>(c, "window", cal.window, "calibration");
    cal.n_grad = field_or<std::size_t>(c, "n_grad", cal.n_grad, "calibration");
    cal.h_min = field_or<double>(c, "h_min", cal.h_min, "calibration");
    cal.g_min = field_or<double>(c, "g_min", cal.g_min, "calibration");
    cal.margin = field_or<double>(c, "margin", cal.margin, "calibration");
    s.calibration = cal;
  }
  s.validate();
  return s;
}

Scenario Scenario::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario " + path.string() + ": " + e.what());
  }
}

double solve_temperature(std::span<const double> logits, double target, double tolerance) {
  const double h_cap = std::log(static_cast<double>(logits.size()));
  if (!(target > 0.0) || !(target < h_cap)) throw InvalidInput("target entropy must lie in (0, ln|V|)");
  std::vector<double> scaled(logits.size());
  auto h_at = [&](double log_t) {
    kernels::divide(logits, std::exp(log_t), scaled);
    return kernels::entropy(scaled).entropy;
  };
  double lo = std::log(1e-4), hi = std::log(1e4);
  if (h_at(lo) > target || h_at(hi) < target) throw InvalidInput("target entropy not reachable by temperature");
  double mid = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    mid = 0.5 * (lo + hi);
    const double h = h_at(mid);
    if (std::abs(h - target) <= tolerance) break;
    (h < target ? lo : hi) = mid;
  }
  return std::exp(mid);
}

namespace {

struct Generator {
  Generator(const Scenario& s, SpikeCalibration c, std::uint64_t seed) : sc(s), cal(c), rng(seed) {}

  const Scenario& sc;
  SpikeCalibration cal;
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  std::uniform_real_distribution<double> unit{-1.0, 1.0};
  std::vector<double> emitted;

  const BaseRegime& regime_at(std::int64_t t) const {
    for (const auto& r : sc.regimes) {
      if (t >= regime_start(r) && t < regime_end(r)) return r;
    }
    throw InvalidInput("no base segment covers step " + std::to_string(t));
  }

  double jittered(double center, double jitter) {
    // Strictly inside the declared band so validation bounds hold.
    return center + jitter * (1.0 - 1e-4) * unit(rng);
  }

  double base_target(std::int64_t t) {
    const auto& r = regime_at(t);
    if (const auto* s = std::get_if<Stable>(&r)) return jittered(s->target_entropy, s->jitter);
    const auto& d = std::get<Drift>(r);
    return jittered(d.start_entropy + d.slope * static_cast<double>(t - d.start), d.jitter);
  }

  double spike_target(double magnitude) const {
    double target = cal.h_min + cal.margin;
    const std::size_t have = std::min(emitted.size(), cal.window);
    if (have > 0) {
      const auto m = kernels::moments(std::span(emitted).last(have));
      target = std::max(target, m.mean + magnitude * m.stddev);
    }
    // Slope over the last n-1 emitted values plus the target, x = 0..n-1.
    const std::size_t n = cal.n_grad;
    if (emitted.size() + 1 >= n) {
      const double xbar = 0.5 * static_cast<double>(n - 1);
      double sxx = 0.0, a = 0.0;
      for (std::size_t i = 0; i < n; ++i) sxx += (i - xbar) * (i - xbar);
      const auto prev = std::span(emitted).last(n - 1);
      for (std::size_t i = 0; i + 1 < n; ++i) a += (i - xbar) * prev[i];
      target = std::max(target, ((cal.g_min + cal.margin) * sxx - a) / (static_cast<double>(n - 1) - xbar));
    }
    return target;
  }

  const Loop* loop_at(std::int64_t t) const {
    for (const auto& l : sc.loops) {
      if (t >= l.start && t < l.end) return &l;
    }
    return nullptr;
  }

  const SpikeInjection* spike_at(std::int64_t t) const {
    for (const auto& s : sc.spikes) {
      if (t >= s.at_step && t < s.at_step + s.width) return &s;
    }
    return nullptr;
  }

  // Shape before temperature scaling; returns the greedy token.
  TokenId base_shape(std::int64_t t, std::vector<double>& g) {
    for (auto& v : g) v = normal(rng);
    if (const Loop* l = loop_at(t)) {
      const TokenId top = l->tokens[static_cast<std::size_t>((t - l->start) % l->period)];
      double best_other = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (std::find(l->tokens.begin(), l->tokens.end(), static_cast<TokenId>(i)) == l->tokens.end()) {
          best_other = std::max(best_other, g[i]);
        }
      }
      for (TokenId id : l->tokens) g[static_cast<std::size_t>(id)] = best_other + 0.5 * l->margin;
      g[static_cast<std::size_t>(top)] = best_other + l->margin;
      return top;
    }
    std::uniform_int_distribution<TokenId> pick(0, static_cast<TokenId>(g.size() - 1));
    const TokenId top = pick(rng);
    g[static_cast<std::size_t>(top)] = *std::max_element(g.begin(), g.end()) + 2.0;
    return top;
  }
};

}  // namespace

GeneratedStream generate(const Scenario& scenario, std::optional<std::uint64_t> seed,
                         const SpikeCalibration& calibration) {
  scenario.validate();
  Generator gen(scenario, scenario.calibration.value_or(calibration), seed.value_or(scenario.seed));
  const double h_cap = std::log(static_cast<double>(scenario.vocab_size));

  GeneratedStream out;
  out.truth.length = scenario.length;
  for (const auto& s : scenario.spikes) out.truth.injected_spike_steps.push_back(s.at_step);
  std::sort(out.truth.injected_spike_steps.begin(), out.truth.injected_spike_steps.end());
  for (const auto& l : scenario.loops) out.truth.loop_spans.emplace_back(l.start, l.end);

  std::vector<double> g(scenario.vocab_size), scaled(scenario.vocab_size);
  std::vector<const std::string*> text_at(static_cast<std::size_t>(scenario.length), nullptr);
  for (const auto& c : scenario.texts) text_at[static_cast<std::size_t>(c.at_step)] = &c.text;

  for (std::int64_t t = 0; t < scenario.length; ++t) {
    const TokenId top = gen.base_shape(t, g);
    double target = gen.base_target(t);
    if (const SpikeInjection* s = gen.spike_at(t)) {
      target = std::max(target, gen.spike_target(s->magnitude));
      if (!(target < h_cap - 1e-6)) {
        throw ConfigError("scenario: spike at step " + std::to_string(t) + " needs entropy " +
                          std::to_string(target) + " >= ln|V|");
      }
    }
    const double temp = solve_temperature(g, target);
    kernels::divide(g, temp, scaled);

    TraceRecord rec;
    rec.t = t;
    rec.logits.resize(scaled.size());
    std::transform(scaled.begin(), scaled.end(), rec.logits.begin(), [](double v) { return static_cast<float>(v); });
    if (t > 0) {
      rec.token_id = out.argmax.back();
      if (const std::string* text = text_at[static_cast<std::size_t>(t - 1)]) rec.token_text = *text;
    }
    const double h = shannon_entropy(LogitVector::from_f32(rec.logits));
    gen.emitted.push_back(h);
    out.entropies.push_back(h);
    out.argmax.push_back(top);
    out.records.push_back(std::move(rec));
  }
  return out;
}

Metrics evaluate(const std::vector<EventRecord>& events, const GroundTruth& truth, std::int64_t tolerance_steps) {
  if (static_cast<std::int64_t>(events.size()) != truth.length) {
    throw InvalidInput("evaluate: " + std::to_string(events.size()) + " events for a stream of " +
                       std::to_string(truth.length) + " steps");
  }
  Metrics m;
  std::vector<std::int64_t> detected;
  for (const auto& e : events) {
    if (e.spike) detected.push_back(e.t);
    m.max_entropy = std::max(m.max_entropy, e.entropy);
  }
  const auto near = [&](std::int64_t a, std::int64_t b) { return std::abs(a - b) <= tolerance_steps; };
  m.detections = static_cast<std::int64_t>(detected.size());
  m.injections = static_cast<std::int64_t>(truth.injected_spike_steps.size());
  for (auto d : detected) {
    if (std::any_of(truth.injected_spike_steps.begin(), truth.injected_spike_steps.end(),
                    [&](auto s) { return near(d, s); })) {
      ++m.matched_detections;
    }
  }
  for (auto s : truth.injected_spike_steps) {
    if (std::any_of(detected.begin(), detected.end(), [&](auto d) { return near(d, s); })) ++m.matched_injections;
  }
  if (m.detections > 0) m.precision = static_cast<double>(m.matched_detections) / static_cast<double>(m.detections);
  if (m.injections > 0) m.recall = static_cast<double>(m.matched_injections) / static_cast<double>(m.injections);
  m.summary = summarize(events);
  return m;
}

json to_json(const Metrics& m) {
  return json{{"precision", m.precision},
              {"recall", m.recall},
              {"detections", m.detections},
              {"injections", m.injections},
              {"matched_detections", m.matched_detections},
              {"matched_injections", m.matched_injections},
              {"max_entropy", m.max_entropy},
              {"summary", spreg::to_json(m.summary)}};
}

}  // namespace spreg::harness
