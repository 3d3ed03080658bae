#pragma once

// Token-sized text pieces that straddle keyword and cue boundaries.

#include <string>
#include <vector>

namespace fragments {

inline const std::vector<std::string> kFragments{
    "Step 1", ": ", "Let me", " think", "First", ",", " the ", "divisors", "Thinking", "Tool", "Action", ":",
    "```", "py", "def ", "import ", "{\"", "Result", " => ", "→", "Output", "Observation", "returns ", "There",
    "fore", "Therefore", ", ", "Final answer", "Thus", " the answer is ", "42", "\n", " ", "é", "数学", "transaction",
    "ACTION", "tHUs", "", "x", "y = f(x)", "Step", "  3"};

}  // namespace fragments
