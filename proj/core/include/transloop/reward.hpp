#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "transloop/textcheck.hpp"

namespace transloop::reward {

// The four binary quality components of one response.
struct RewardBreakdown {
  int r_acc = 0;
  int r_lang = 0;
  int r_rep = 0;
  int r_fmt = 0;
};

// Composed scalar reward. Correctness pays out only when the quality gate
// (format AND language AND no-repetition) holds:
//   1.0  gate && correct
//   0.1  gate && !correct
//   0.0  otherwise
struct FinalReward {
  double value = 0.0;
  bool gate_passed = false;
};

struct ScoringContext {
  std::string target_language;
  std::string gold_answer;
  textcheck::RepetitionConfig repetition_cfg;
  std::vector<textcheck::LanguageProfile> language_profiles;
  double language_confidence_min = 0.9;
};

// Normalizes an answer string for comparison: trims whitespace and, for
// integers, strips a leading '+', leading zeros, and maps "-0" to "0".
// Non-integers compare verbatim after trimming.
std::string canonicalize_answer(std::string_view raw);

// 1 iff the content of the last well-formed \boxed{...} marker equals the
// gold answer after canonicalization; 0 when no marker parses.
int check_answer(std::string_view response_text, std::string_view gold_answer);

// r_fmt from the think-block format check; r_lang from language id over the
// think block (whole text when absent); r_rep over the whole response;
// r_acc from the post-think region (whole text when absent).
RewardBreakdown score_response(std::string_view response, const ScoringContext& ctx);

FinalReward compose_final(const RewardBreakdown& b);

}  // namespace transloop::reward
