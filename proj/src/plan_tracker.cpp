#include "spreg/plan_tracker.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "spreg/default_patterns.hpp"
#include "spreg/errors.hpp"

namespace spreg {

namespace {

constexpr std::array<std::string_view, kStepTypeCount> kNames{"reasoning", "action", "observation",
                                                              "conclusion"};

bool is_ascii_alnum(unsigned char c) { return c < 0x80 && std::isalnum(c); }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

std::size_t count_code_points(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return !is_continuation(c); }));
}

// Byte offset after skipping `n` code points from the front.
std::size_t skip_code_points(std::string_view s, std::size_t n) {
  std::size_t i = 0;
  while (i < s.size() && is_continuation(s[i])) ++i;
  while (n > 0 && i < s.size()) {
    ++i;
    while (i < s.size() && is_continuation(s[i])) ++i;
    --n;
  }
  return i;
}

}  // namespace

std::string_view to_string(StepType s) { return kNames[static_cast<std::size_t>(s)]; }

std::optional<StepType> parse_step_type(std::string_view name) {
  const std::string lower = ascii_lower(name);
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (lower == kNames[i]) return static_cast<StepType>(i);
  }
  return std::nullopt;
}

PatternSet PatternSet::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("pattern file must be a JSON object");
  PatternSet set;
  set.source_ = doc;

  for (std::size_t i = 0; i < kStepTypeCount; ++i) {
    const std::string name(kNames[i]);
    if (!doc.contains(name) || !doc[name].is_object()) {
      throw ConfigError("pattern file is missing the '" + name + "' group");
    }
    const auto& g = doc[name];
    Group& group = set.groups_[i];
    try {
      for (const auto& kw : g.value("keywords", nlohmann::json::array())) {
        const auto text = kw.get<std::string>();
        if (text.empty()) throw ConfigError("empty keyword in '" + name + "'");
        group.keywords.push_back(ascii_lower(text));
      }
      for (const auto& cue : g.value("regex_cues", nlohmann::json::array())) {
        const auto text = cue.get<std::string>();
        try {
          group.cues.emplace_back(text, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
        } catch (const std::regex_error& e) {
          throw ConfigError("pattern '" + text + "' in '" + name + "' does not compile: " + e.what());
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("pattern group '" + name + "': " + e.what());
    }
    if (group.keywords.empty() && group.cues.empty()) {
      throw ConfigError("pattern group '" + name + "' has no patterns");
    }
  }

  if (doc.contains("priority")) {
    const auto& pr = doc["priority"];
    if (!pr.is_array() || pr.size() != kStepTypeCount) {
      throw ConfigError("priority must list all four step types");
    }
    std::array<bool, kStepTypeCount> seen{};
    for (std::size_t i = 0; i < kStepTypeCount; ++i) {
      const auto st = pr[i].is_string() ? parse_step_type(pr[i].get<std::string>()) : std::nullopt;
      if (!st || seen[static_cast<std::size_t>(*st)]) throw ConfigError("priority must be a permutation of step types");
      seen[static_cast<std::size_t>(*st)] = true;
      set.priority_[i] = *st;
    }
  }
  return set;
}

PatternSet PatternSet::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pattern file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("pattern file " + path.string() + ": " + e.what());
  }
}

std::shared_ptr<const PatternSet> PatternSet::defaults() {
  static const auto set =
      std::make_shared<const PatternSet>(from_json(nlohmann::json::parse(detail::kDefaultPatternsJson)));
  return set;
}

std::optional<PatternSet::Match> PatternSet::last_match(std::string_view text) const {
  std::optional<Match> best;
  std::array<int, kStepTypeCount> rank{};
  for (std::size_t i = 0; i < kStepTypeCount; ++i) rank[static_cast<std::size_t>(priority_[i])] = static_cast<int>(i);

  auto offer = [&](std::size_t end, StepType type) {
    if (!best || end > best->end ||
        (end == best->end && rank[static_cast<std::size_t>(type)] < rank[static_cast<std::size_t>(best->type)])) {
      best = Match{end, type};
    }
  };

  const std::string lower = ascii_lower(text);
  const std::string subject(text);
  for (std::size_t i = 0; i < kStepTypeCount; ++i) {
    const auto type = static_cast<StepType>(i);
    for (const auto& kw : groups_[i].keywords) {
      const bool needs_boundary = is_ascii_alnum(static_cast<unsigned char>(kw.front()));
      for (std::size_t pos = lower.find(kw); pos != std::string::npos; pos = lower.find(kw, pos + 1)) {
        if (needs_boundary && pos > 0 && is_ascii_alnum(static_cast<unsigned char>(lower[pos - 1]))) continue;
        offer(pos + kw.size(), type);
      }
    }
    for (const auto& cue : groups_[i].cues) {
      for (auto it = std::sregex_iterator(subject.begin(), subject.end(), cue); it != std::sregex_iterator(); ++it) {
        if (it->length(0) == 0) continue;
        offer(static_cast<std::size_t>(it->position(0) + it->length(0)), type);
      }
    }
  }
  return best;
}

void GuidanceTable::validate() const {
  for (std::size_t i = 0; i < kStepTypeCount; ++i) {
    if (!(lambda_base[i] > 0.0) || !(gamma_tau[i] > 0.0)) {
      throw ConfigError("guidance entries must be > 0 (step " + std::string(kNames[i]) + ")");
    }
  }
}

GuidanceParams guidance_params(StepType step, const GuidanceTable& table) {
  const auto i = static_cast<std::size_t>(step);
  return {table.lambda_base[i], table.gamma_tau[i]};
}

std::string utf8_tail(std::string_view text, std::size_t max_chars) {
  const std::size_t total = count_code_points(text);
  if (total <= max_chars) return std::string(text);
  return std::string(text.substr(skip_code_points(text, total - max_chars)));
}

PlanTracker::PlanTracker(std::shared_ptr<const PatternSet> patterns, std::size_t tail_chars)
    : patterns_(std::move(patterns)), tail_chars_(tail_chars) {
  if (!patterns_) throw ConfigError("plan tracker needs a pattern set");
  if (tail_chars_ == 0) throw ConfigError("plan tracker tail must be positive");
}

void PlanTracker::ingest(std::string_view token_text) {
  if (token_text.empty()) return;
  tail_.append(token_text);
  tail_code_points_ += count_code_points(token_text);
  if (tail_code_points_ > tail_chars_) {
    tail_.erase(0, skip_code_points(tail_, tail_code_points_ - tail_chars_));
    tail_code_points_ = tail_chars_;
  }
  dirty_ = true;
}

StepType PlanTracker::classify() {
  if (!dirty_) return current_;
  dirty_ = false;
  if (auto m = patterns_->last_match(tail_)) current_ = m->type;
  return current_;
}

}  // namespace spreg
