#include "transloop/reward.hpp"

#include <cctype>
#include <optional>

namespace transloop::reward {

namespace {

std::string_view trim_ascii(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Content of the last \boxed{...} whose braces balance.
std::optional<std::string> last_boxed_content(std::string_view text) {
  constexpr std::string_view kMarker = "\\boxed{";
  std::optional<std::string> result;
  for (std::size_t at = text.find(kMarker); at != std::string_view::npos;
       at = text.find(kMarker, at + 1)) {
    const std::size_t begin = at + kMarker.size();
    int depth = 1;
    for (std::size_t i = begin; i < text.size(); ++i) {
      if (text[i] == '{') ++depth;
      if (text[i] == '}' && --depth == 0) {
        result = std::string(text.substr(begin, i - begin));
        break;
      }
    }
  }
  return result;
}

}  // namespace

std::string canonicalize_answer(std::string_view raw) {
  const std::string_view t = trim_ascii(raw);
  if (t.empty()) return std::string(t);

  std::size_t i = 0;
  bool negative = false;
  if (t[0] == '+' || t[0] == '-') {
    negative = t[0] == '-';
    i = 1;
  }
  if (i == t.size()) return std::string(t);
  for (std::size_t j = i; j < t.size(); ++j) {
    if (!std::isdigit(static_cast<unsigned char>(t[j]))) return std::string(t);
  }
  while (i + 1 < t.size() && t[i] == '0') ++i;
  std::string digits(t.substr(i));
  if (digits == "0") return digits;
  return negative ? "-" + digits : digits;
}

int check_answer(std::string_view response_text, std::string_view gold_answer) {
  const auto boxed = last_boxed_content(response_text);
  if (!boxed) return 0;
  return canonicalize_answer(*boxed) == canonicalize_answer(gold_answer) ? 1 : 0;
}

RewardBreakdown score_response(std::string_view response, const ScoringContext& ctx) {
  RewardBreakdown b;

  const textcheck::FormatVerdict fmt = textcheck::check_format(response);
  b.r_fmt = fmt.has_think_block ? 1 : 0;

  const std::string_view lang_region =
      fmt.has_think_block ? std::string_view(*fmt.think_content) : response;
  const textcheck::LanguageGuess guess =
      textcheck::identify_language(lang_region, ctx.language_profiles);
  b.r_lang = (guess.code == ctx.target_language &&
              guess.confidence >= ctx.language_confidence_min)
                 ? 1
                 : 0;

  b.r_rep = textcheck::detect_repetition(response, ctx.repetition_cfg).is_repetitive ? 0 : 1;

  const std::string_view answer_region =
      fmt.has_think_block ? std::string_view(*fmt.post_think_content) : response;
  b.r_acc = check_answer(answer_region, ctx.gold_answer);
  return b;
}

FinalReward compose_final(const RewardBreakdown& b) {
  FinalReward r;
  r.gate_passed = b.r_fmt == 1 && b.r_lang == 1 && b.r_rep == 1;
  r.value = r.gate_passed ? (b.r_acc == 1 ? 1.0 : 0.1) : 0.0;
  return r;
}

}  // namespace transloop::reward
