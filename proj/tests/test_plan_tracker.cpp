#include <random>

#include <doctest.h>

#include "fragments.hpp"
#include "spreg/errors.hpp"
#include "spreg/plan_tracker.hpp"

using namespace spreg;
using nlohmann::json;

namespace {

StepType classify_text(const std::string& text) {
  PlanTracker t(PatternSet::defaults());
  t.ingest(text);
  return t.classify();
}

using fragments::kFragments;

}  // namespace

TEST_CASE("example strings classify to their step types") {
  CHECK(classify_text("Step 1: Let me think about the divisors") == StepType::Reasoning);
  CHECK(classify_text("Result => 42") == StepType::Observation);
  CHECK(classify_text("Therefore, the final answer is 7") == StepType::Conclusion);

  PlanTracker t(PatternSet::defaults());
  t.ingest("```");
  t.ingest("def ");
  CHECK(t.classify() == StepType::Action);
}

TEST_CASE("keyword and cue matching details") {
  CHECK(classify_text("therefore we stop") == StepType::Conclusion);  // case-insensitive
  CHECK(classify_text("Let me check. The transaction settled") == StepType::Reasoning);  // no match inside a word
  CHECK(classify_text("Tool call then Result: 3") == StepType::Observation);  // most recent wins
  CHECK(classify_text("value → 3") == StepType::Observation);
  CHECK(classify_text("{\"name\": 1}") == StepType::Action);
  CHECK(classify_text("Step 12") == StepType::Reasoning);
}

TEST_CASE("ties on end offset go to the higher priority") {
  const json doc = {{"reasoning", {{"keywords", {"zz"}}}},
                    {"action", {{"keywords", {"b"}}}},
                    {"observation", {{"keywords", {"ab"}}}},
                    {"conclusion", {{"keywords", {"qq"}}}}};
  const auto set = PatternSet::from_json(doc);
  const auto m = set.last_match("xx ab");
  REQUIRE(m.has_value());
  CHECK(m->type == StepType::Observation);  // "b" is inside a word; "ab" ends at the same offset

  json doc2 = {{"reasoning", {{"regex_cues", {"b$"}}}},
               {"action", {{"regex_cues", {"ab$"}}}},
               {"observation", {{"keywords", {"nope"}}}},
               {"conclusion", {{"keywords", {"nope2"}}}}};
  CHECK(PatternSet::from_json(doc2).last_match("ab")->type == StepType::Action);
  doc2["priority"] = {"reasoning", "action", "observation", "conclusion"};
  CHECK(PatternSet::from_json(doc2).last_match("ab")->type == StepType::Reasoning);
}

TEST_CASE("pattern file validation") {
  json ok = {{"reasoning", {{"keywords", {"a"}}}},
             {"action", {{"keywords", {"b"}}}},
             {"observation", {{"keywords", {"c"}}}},
             {"conclusion", {{"keywords", {"d"}}}}};
  CHECK_NOTHROW(PatternSet::from_json(ok));
  json missing = ok;
  missing.erase("action");
  CHECK_THROWS_AS(PatternSet::from_json(missing), ConfigError);
  json empty = ok;
  empty["action"] = json::object();
  CHECK_THROWS_AS(PatternSet::from_json(empty), ConfigError);
  json bad_regex = ok;
  bad_regex["action"]["regex_cues"] = {"(unclosed"};
  CHECK_THROWS_AS(PatternSet::from_json(bad_regex), ConfigError);
  json bad_priority = ok;
  bad_priority["priority"] = {"action", "action", "reasoning", "conclusion"};
  CHECK_THROWS_AS(PatternSet::from_json(bad_priority), ConfigError);
  CHECK_THROWS_AS(PatternSet::from_file("/nonexistent/patterns.json"), ConfigError);
}

TEST_CASE("tail is bounded in code points") {
  PlanTracker t(PatternSet::defaults());
  for (int i = 0; i < 300; ++i) t.ingest("a");
  CHECK(t.tail().size() == 256);
  PlanTracker u(PatternSet::defaults(), 4);
  u.ingest("ab→数é");
  CHECK(u.tail() == "b→数é");
  CHECK(utf8_tail("héllo", 3) == "llo");
  CHECK(utf8_tail("→→", 5) == "→→");
}

TEST_CASE("step type is sticky and empty text leaves the tail alone") {
  PlanTracker t(PatternSet::defaults(), 16);
  t.ingest("Therefore, ");
  CHECK(t.classify() == StepType::Conclusion);
  const std::string before = t.tail();
  t.ingest("");
  CHECK(t.tail() == before);
  for (int i = 0; i < 40; ++i) t.ingest("z");
  CHECK(t.classify() == StepType::Conclusion);
}

TEST_CASE("guidance table lookup") {
  const GuidanceTable table;
  CHECK(guidance_params(StepType::Reasoning, table).lambda_base == 1.5);
  CHECK(guidance_params(StepType::Reasoning, table).gamma_tau == 1.0);
  CHECK(guidance_params(StepType::Action, table).lambda_base == 1.8);
  CHECK(guidance_params(StepType::Observation, table).lambda_base == 1.5);
  GuidanceTable custom;
  custom.lambda_base[3] = 2.0;
  custom.gamma_tau[3] = 0.9;
  CHECK(guidance_params(StepType::Conclusion, custom).lambda_base == 2.0);
  CHECK(guidance_params(StepType::Conclusion, custom).gamma_tau == 0.9);
  custom.gamma_tau[0] = 0.0;
  CHECK_THROWS_AS(custom.validate(), ConfigError);
}

TEST_CASE("incremental classification equals batch classification of the tail") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> pick(0, kFragments.size() - 1);
  std::uniform_int_distribution<int> len(1, 120);
  const auto patterns = PatternSet::defaults();
  for (int i = 0; i < 300; ++i) {
    PlanTracker inc(patterns);
    std::string all;
    StepType sticky = StepType::Reasoning;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) {
      const auto& frag = kFragments[pick(rng)];
      inc.ingest(frag);
      all += frag;
      if (auto m = patterns->last_match(utf8_tail(all, 256))) sticky = m->type;
      REQUIRE(inc.classify() == sticky);
    }
    CHECK(inc.tail() == utf8_tail(all, 256));
  }
}
