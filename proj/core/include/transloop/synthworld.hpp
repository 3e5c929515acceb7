#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "transloop/textcheck.hpp"

namespace transloop::synth {

enum class Op : int { add = 0, sub = 1, mul = 2 };

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);
long long apply_op(int a, Op op, int b);

// A synthetic language: `vocab` tokens built from a per-language letter
// pool, so alphabets of different languages are character-disjoint. The
// last three tokens encode the operators; the rest are digits of a
// base-(V-3) numeral system.
struct SynthLanguage {
  std::string code;
  std::vector<std::string> alphabet;

  int digit_base() const { return static_cast<int>(alphabet.size()) - 3; }
  int op_token_index(Op op) const { return digit_base() + static_cast<int>(op); }
  // Index of `token` in the alphabet, or -1.
  int token_index(std::string_view token) const;
};

struct SynthQuestion {
  int id = 0;
  int a = 0;
  int b = 0;
  Op op = Op::add;
  long long gold_answer = 0;
  std::vector<std::string> source_tokens;  // rendering in the source language
};

struct WorldConfig {
  int vocab_size = 12;
  int question_count = 300;
  int value_min = 0;
  int value_max = 9;
  std::vector<std::string> language_codes = {"A", "B"};
  // Probability that a SOLVE attempt on a parsed question computes the right
  // answer, by operator, with a harder slice of questions below that.
  double op_solve_probs[3] = {1.0, 0.97, 0.92};
  int hard_question_percent = 8;
  double hard_solve_prob = 0.4;
  textcheck::RepetitionConfig repetition;

  void validate() const;
};

struct World {
  WorldConfig cfg;
  std::vector<SynthLanguage> languages;  // [0] is the source language
  std::vector<SynthQuestion> questions;
  long long answer_min = 0;
  long long answer_max = 0;

  static World build(const WorldConfig& cfg, std::uint64_t seed);

  const SynthLanguage& source_language() const { return languages.front(); }
  int language_index(std::string_view code) const;  // -1 when unknown
  // Difficulty is a property of the question semantics, so it is identical
  // across languages and across faithful translations.
  double solve_success_prob(int a, Op op, int b) const;
};

// Letter pools are disjoint 8-letter slices of A..Z; supports up to three
// languages and alphabets of up to 64 two-letter tokens.
std::vector<SynthLanguage> make_languages(std::span<const std::string> codes, int vocab_size);

std::vector<SynthQuestion> generate_questions(int count, int value_min, int value_max,
                                              std::uint64_t seed, const SynthLanguage& source);

// Canonical rendering: base-(V-3) digits of `a`, the operator token, digits
// of `b`. Injective, and decode(render(q)) == q.
std::vector<std::string> render_question(const SynthQuestion& q, const SynthLanguage& lang);

// Strict inverse of render_question: every token must belong to `lang`,
// exactly one operator token, both sides canonical numerals (no leading
// zeros). nullopt otherwise.
std::optional<std::tuple<int, Op, int>> decode_question(std::span<const std::string> tokens,
                                                        const SynthLanguage& lang);

// ---------------------------------------------------------------------------
// Evaluation-only oracles. Training code must never call these; the hooks
// below exist so audits can replace them with trapping stubs and verify that
// training output is unchanged.
// ---------------------------------------------------------------------------

// The index-preserving bijection between two alphabets.
struct GroundTruthMap {
  const SynthLanguage* src = nullptr;
  const SynthLanguage* tgt = nullptr;

  std::string map_token(std::string_view token) const;
  std::vector<std::string> map_tokens(std::span<const std::string> tokens) const;

  static GroundTruthMap between(const World& world, int src_index, int tgt_index);
};

// True iff `candidate` decodes in `tgt` to the same (a, op, b) as `q`.
bool translation_is_faithful(std::span<const std::string> candidate, const SynthQuestion& q,
                             const SynthLanguage& tgt);

using FaithfulnessFn = std::function<bool(std::span<const std::string>, const SynthQuestion&,
                                          const SynthLanguage&)>;
using GroundTruthFactoryFn = std::function<GroundTruthMap(const World&, int, int)>;

void set_faithfulness_hook(FaithfulnessFn fn);   // empty fn restores the default
void set_ground_truth_hook(GroundTruthFactoryFn fn);

// Language-id profiles covering the world's alphabets.
std::vector<textcheck::LanguageProfile> make_language_profiles(const World& world);

}  // namespace transloop::synth
