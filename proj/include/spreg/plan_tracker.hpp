#pragma once

// Structural step classification of the decoded stream (reasoning, action,
// observation, conclusion) and the step-dependent guidance parameters.

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace spreg {

enum class StepType { Reasoning = 0, Action = 1, Observation = 2, Conclusion = 3 };

inline constexpr std::size_t kStepTypeCount = 4;

std::string_view to_string(StepType s);
std::optional<StepType> parse_step_type(std::string_view name);

/**
 * Compiled keyword and syntax-cue patterns, one group per step type.
 *
 * Keywords match case-insensitively (ASCII folding). A keyword that starts
 * with an ASCII letter or digit must not be preceded by one, so "Action" does
 * not fire inside "transaction"; non-ASCII keywords match anywhere. Regex cues
 * are ECMAScript, case-insensitive. Immutable after construction and safe to
 * share across streams.
 */
class PatternSet {
 public:
  /// Throws ConfigError on a bad schema or a regex that fails to compile.
  static PatternSet from_json(const nlohmann::json& doc);
  static PatternSet from_file(const std::filesystem::path& path);
  /// The bundled English patterns (data/patterns/default.json).
  static std::shared_ptr<const PatternSet> defaults();

  struct Match {
    std::size_t end;  // byte offset one past the match
    StepType type;
  };

  /// Most recent match in `text`; ties on end offset go to the higher priority.
  std::optional<Match> last_match(std::string_view text) const;

  const std::array<StepType, kStepTypeCount>& priority() const noexcept { return priority_; }
  const nlohmann::json& source() const noexcept { return source_; }

 private:
  struct Group {
    std::vector<std::string> keywords;  // lower-cased
    std::vector<std::regex> cues;
  };

  std::array<Group, kStepTypeCount> groups_;
  std::array<StepType, kStepTypeCount> priority_{StepType::Conclusion, StepType::Action,
                                                 StepType::Observation, StepType::Reasoning};
  nlohmann::json source_;
};

/// λ_base(τ) and γ(τ) per step type.
struct GuidanceTable {
  std::array<double, kStepTypeCount> lambda_base{1.5, 1.8, 1.5, 1.8};
  std::array<double, kStepTypeCount> gamma_tau{1.0, 1.0, 1.0, 1.0};

  void validate() const;
};

struct GuidanceParams {
  double lambda_base;
  double gamma_tau;
};

GuidanceParams guidance_params(StepType step, const GuidanceTable& table);

/// Last `max_chars` UTF-8 code points of `text`.
std::string utf8_tail(std::string_view text, std::size_t max_chars);

class PlanTracker {
 public:
  explicit PlanTracker(std::shared_ptr<const PatternSet> patterns, std::size_t tail_chars = 256);

  /// Appends decoded token text; empty text leaves the tail untouched.
  void ingest(std::string_view token_text);

  /// Re-classifies if the tail changed since the last call. With no match in
  /// the tail the active step type persists.
  StepType classify();

  StepType current() const noexcept { return current_; }
  const std::string& tail() const noexcept { return tail_; }

 private:
  std::shared_ptr<const PatternSet> patterns_;
  std::size_t tail_chars_;
  std::string tail_;
  std::size_t tail_code_points_ = 0;
  bool dirty_ = false;
  StepType current_ = StepType::Reasoning;
};

}  // namespace spreg
