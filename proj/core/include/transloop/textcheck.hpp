#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace transloop::textcheck {

// Whitespace-delimited token view of a text. Joining `tokens` with single
// spaces and re-tokenizing yields the same list; empty text yields no tokens.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::string source_text;

  std::size_t size() const { return tokens.size(); }
};

// Splits on Unicode whitespace (ASCII space/tab/newline plus NBSP, the
// U+2000 block, ideographic space, ...). Tokens are maximal non-space runs.
TokenSequence tokenize(std::string_view text);

struct RepetitionConfig {
  int ngram_n = 20;
  int ngram_count_threshold = 20;
  int line_min_tokens = 20;
  int line_count_threshold = 6;

  void validate() const;  // throws std::invalid_argument if any field < 1
};

enum class RepetitionCriterion { none, ngram, line, both };

struct RepetitionEvidence {
  std::string excerpt;  // the offending n-gram or line
  int count = 0;        // number of occurrences observed
};

struct RepetitionVerdict {
  bool is_repetitive = false;
  RepetitionCriterion triggered = RepetitionCriterion::none;
  std::optional<RepetitionEvidence> evidence;
};

// Suffix array of the token sequence: start positions of all suffixes,
// sorted lexicographically by token content. O(n log^2 n) prefix doubling.
std::vector<int> build_suffix_array(const TokenSequence& tokens);

// lcp[0] = 0; lcp[i] = length of the longest common prefix of the suffixes
// at sa[i-1] and sa[i] (Kasai). Throws std::invalid_argument if `sa` is not
// a permutation of 0..n-1.
std::vector<int> lcp_array(const TokenSequence& tokens, std::span<const int> sa);

// True iff some n-gram of cfg.ngram_n tokens occurs at least
// cfg.ngram_count_threshold times. Occurrences are counted over all start
// positions (overlaps included) via maximal LCP intervals: an n-gram with k
// occurrences corresponds to a maximal run of adjacent suffixes whose LCP
// stays >= n and has width k.
std::pair<bool, std::optional<RepetitionEvidence>> detect_ngram_repetition(
    const TokenSequence& tokens, const RepetitionConfig& cfg);

// True iff some exact line (split on '\n', whitespace-trimmed) has at least
// cfg.line_min_tokens tokens and occurs at least cfg.line_count_threshold
// times.
std::pair<bool, std::optional<RepetitionEvidence>> detect_line_repetition(
    std::string_view text, const RepetitionConfig& cfg);

// Either criterion marks the text repetitive.
RepetitionVerdict detect_repetition(std::string_view text, const RepetitionConfig& cfg);

struct LanguageProfile {
  std::string code;
  // Synthetic languages: the character set of the alphabet.
  std::optional<std::unordered_set<char>> alphabet;
  // Natural languages: frequent character n-grams, most frequent first.
  std::optional<std::vector<std::string>> char_ngram_ranks;
};

struct LanguageGuess {
  std::string code;        // "unknown" when nothing classifies
  double confidence = 0.0; // in [0, 1]
};

// Alphabet profiles win by character count; confidence is the winning share
// of all characters that belong to any profile's alphabet. N-gram profiles
// use the out-of-place rank distance against the text's own n-gram ranking.
// Ties break by profile order. Throws std::invalid_argument on empty
// profile list.
LanguageGuess identify_language(std::string_view text, std::span<const LanguageProfile> profiles);

struct FormatVerdict {
  bool has_think_block = false;
  std::optional<std::string> think_content;
  std::optional<std::string> post_think_content;
};

// Valid iff the text contains exactly one "<think>" and one "</think>", in
// that order, with non-whitespace content after the close.
FormatVerdict check_format(std::string_view text);

// Content of the first <Translation>...</Translation> pair, tags matched
// case-insensitively. nullopt when absent or unclosed.
std::optional<std::string> extract_translation(std::string_view text);

}  // namespace transloop::textcheck
