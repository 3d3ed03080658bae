#include <fstream>
#include <set>

#include "spreg/errors.hpp"
#include "spreg/trace_io.hpp"

namespace spreg {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& section, const std::set<std::string>& known) {
  for (const auto& [key, _] : j.items()) {
    if (key != "doc" && !known.count(key)) throw ConfigError("unknown field '" + section + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + section + key + "': " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  const auto& s = j.at(key);
  if (!s.is_object()) throw ConfigError(std::string("section '") + key + "' must be an object");
  return s;
}

void read_step_map(const json& j, std::array<double, kStepTypeCount>& out, const std::string& name) {
  if (!j.is_object()) throw ConfigError("guidance." + name + " must map step types to numbers");
  for (const auto& [key, value] : j.items()) {
    const auto st = parse_step_type(key);
    if (!st) throw ConfigError("guidance." + name + ": unknown step type '" + key + "'");
    if (!value.is_number()) throw ConfigError("guidance." + name + "." + key + " must be a number");
    out[static_cast<std::size_t>(*st)] = value.get<double>();
  }
}

json step_map(const std::array<double, kStepTypeCount>& values) {
  json j = json::object();
  for (std::size_t i = 0; i < kStepTypeCount; ++i) j[std::string(to_string(static_cast<StepType>(i)))] = values[i];
  return j;
}

}  // namespace

ControllerConfig preset_config(const std::string& name) {
  ControllerConfig c;
  if (name == "method") {
    c.detector = DetectorConfig::method_preset();
  } else if (name == "experiments") {
    c.detector = DetectorConfig::experiments_preset();
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected method or experiments)");
  }
  return c;
}

namespace {

ControllerConfig merge_config(const json& j, ControllerConfig c, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, "", {"preset", "vocab_size", "monitor", "detector", "repair", "guidance", "patterns",
                         "tracker_tail"});

  if (j.contains("preset")) {
    auto keep_patterns = c.patterns;
    const auto vocab = c.vocab_size;
    c = preset_config(j["preset"].get<std::string>());
    c.patterns = keep_patterns;
    c.vocab_size = vocab;
  }
  read(j, "vocab_size", c.vocab_size, "");
  read(j, "tracker_tail", c.tracker_tail, "");

  if (j.contains("monitor")) {
    const auto& m = section(j, "monitor");
    reject_unknown(m, "monitor.", {"window", "entropy_base"});
    read(m, "window", c.monitor.window, "monitor.");
    read(m, "entropy_base", c.monitor.entropy_base, "monitor.");
  }
  if (j.contains("detector")) {
    const auto& d = section(j, "detector");
    reject_unknown(d, "detector.",
                   {"alpha", "h_min", "g_min", "h_extreme", "t_warm", "t_cool", "n_grad", "c_high", "epsilon"});
    read(d, "alpha", c.detector.alpha, "detector.");
    read(d, "h_min", c.detector.h_min, "detector.");
    read(d, "g_min", c.detector.g_min, "detector.");
    read(d, "h_extreme", c.detector.h_extreme, "detector.");
    read(d, "t_warm", c.detector.t_warm, "detector.");
    read(d, "t_cool", c.detector.t_cool, "detector.");
    read(d, "n_grad", c.detector.n_grad, "detector.");
    read(d, "c_high", c.detector.c_high, "detector.");
    read(d, "epsilon", c.detector.epsilon, "detector.");
  }
  if (j.contains("repair")) {
    const auto& r = section(j, "repair");
    reject_unknown(r, "repair.",
                   {"beta", "eta", "lambda_max", "epsilon", "rho", "t_recover", "recent_window", "pool_capacity",
                    "direction", "aggregation"});
    read(r, "beta", c.repair.beta, "repair.");
    read(r, "eta", c.repair.eta, "repair.");
    read(r, "lambda_max", c.repair.lambda_max, "repair.");
    read(r, "epsilon", c.repair.epsilon, "repair.");
    read(r, "rho", c.repair.rho, "repair.");
    read(r, "t_recover", c.repair.t_recover, "repair.");
    read(r, "recent_window", c.repair.recent_window, "repair.");
    read(r, "pool_capacity", c.repair.pool_capacity, "repair.");
    if (r.contains("direction")) {
      const auto s = r["direction"].get<std::string>();
      if (s == to_string(GuidanceDirection::TowardConditional)) {
        c.repair.direction = GuidanceDirection::TowardConditional;
      } else if (s == to_string(GuidanceDirection::TowardReference)) {
        c.repair.direction = GuidanceDirection::TowardReference;
      } else {
        throw ConfigError("repair.direction must be toward-conditional or toward-reference");
      }
    }
    if (r.contains("aggregation")) {
      const auto s = r["aggregation"].get<std::string>();
      if (s == to_string(PoolAggregation::LogMean)) {
        c.repair.aggregation = PoolAggregation::LogMean;
      } else if (s == to_string(PoolAggregation::ProbMean)) {
        c.repair.aggregation = PoolAggregation::ProbMean;
      } else {
        throw ConfigError("repair.aggregation must be log-mean or prob-mean");
      }
    }
  }
  if (j.contains("guidance")) {
    const auto& g = section(j, "guidance");
    reject_unknown(g, "guidance.", {"lambda_base", "gamma_tau"});
    if (g.contains("lambda_base")) read_step_map(g["lambda_base"], c.guidance.lambda_base, "lambda_base");
    if (g.contains("gamma_tau")) read_step_map(g["gamma_tau"], c.guidance.gamma_tau, "gamma_tau");
  }
  if (j.contains("patterns")) {
    const auto& p = j["patterns"];
    if (p.is_string()) {
      std::filesystem::path path = p.get<std::string>();
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      c.patterns = std::make_shared<const PatternSet>(PatternSet::from_file(path));
    } else if (p.is_object()) {
      c.patterns = std::make_shared<const PatternSet>(PatternSet::from_json(p));
    } else if (!p.is_null()) {
      throw ConfigError("patterns must be a path or an inline pattern object");
    }
  }
  return c;
}

}  // namespace

ControllerConfig config_from_json(const json& j, ControllerConfig base, const std::filesystem::path& base_dir) {
  try {
    return merge_config(j, std::move(base), base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ControllerConfig load_config(const std::filesystem::path& path, ControllerConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base), path.parent_path());
}

json config_to_json(const ControllerConfig& c) {
  json j;
  j["vocab_size"] = c.vocab_size;
  j["tracker_tail"] = c.tracker_tail;
  j["monitor"] = {
      {"window", c.monitor.window},
      {"entropy_base", c.monitor.entropy_base},
      {"doc",
       {{"window", "W: size of the sliding entropy window"},
        {"entropy_base", "log base of H_t; thresholds are in the same unit (e = nats)"}}},
  };
  j["detector"] = {
      {"alpha", c.detector.alpha},
      {"h_min", c.detector.h_min},
      {"g_min", c.detector.g_min},
      {"h_extreme", c.detector.h_extreme},
      {"t_warm", c.detector.t_warm},
      {"t_cool", c.detector.t_cool},
      {"n_grad", c.detector.n_grad},
      {"c_high", c.detector.c_high},
      {"epsilon", c.detector.epsilon},
      {"doc",
       {{"alpha", "α: spike iff H_t > μ_W + α·σ_W"},
        {"h_min", "H_min: spike also requires H_t >= H_min"},
        {"g_min", "g_min: gradient floor; slower rises below h_extreme are not evaluated"},
        {"h_extreme", "entropy at which the gradient pre-filter is bypassed"},
        {"t_warm", "T_warm: initial steps with no detection"},
        {"t_cool", "T_cool: steps with no detection after each intervention"},
        {"n_grad", "n: entropy values used for the gradient g_t"},
        {"c_high", "C_high: consecutive steps with H_t > μ_W that start aggressive recovery"},
        {"epsilon", "ε in the severity score (H_t - μ_W - α·σ_W) / (σ_W + ε)"}}},
  };
  j["repair"] = {
      {"beta", c.repair.beta},
      {"eta", c.repair.eta},
      {"lambda_max", c.repair.lambda_max},
      {"epsilon", c.repair.epsilon},
      {"rho", c.repair.rho},
      {"t_recover", c.repair.t_recover},
      {"recent_window", c.repair.recent_window},
      {"pool_capacity", c.repair.pool_capacity},
      {"direction", std::string(to_string(c.repair.direction))},
      {"aggregation", std::string(to_string(c.repair.aggregation))},
      {"doc",
       {{"beta", "β: gain on the relative entropy excess (H_t - μ_W)/(μ_W + ε)"},
        {"eta", "η: token-weight gain"},
        {"lambda_max", "λ_max: guidance scale cap; also the aggressive-recovery scale"},
        {"epsilon", "ε: numeric guard in λ and w"},
        {"rho", "ρ: repetition penalty over 𝒱_recent"},
        {"t_recover", "T: aggressive-recovery sampling temperature"},
        {"recent_window", "|𝒱_recent|: number of recent sampled tokens penalized"},
        {"pool_capacity", "K: low-entropy distributions kept for the reference prior"},
        {"direction", "toward-conditional: z_ref + λ·w·(z_c - z_ref); toward-reference: z_c + λ·w·(z_ref - z_c)"},
        {"aggregation", "log-mean or prob-mean of stored distributions"}}},
  };
  j["guidance"] = {
      {"lambda_base", step_map(c.guidance.lambda_base)},
      {"gamma_tau", step_map(c.guidance.gamma_tau)},
      {"doc", {{"lambda_base", "λ_base(τ) per step type"}, {"gamma_tau", "γ(τ) per step type"}}},
  };
  if (c.patterns) j["patterns"] = c.patterns->source();
  return j;
}

}  // namespace spreg
