#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transloop/rng.hpp"
#include "transloop/synthworld.hpp"

namespace transloop::policy {

struct PolicyDims {
  int vocab_size = 0;
  int language_count = 0;

  int param_count() const { return vocab_size * vocab_size + 4 * language_count; }
  int trans_offset() const { return 0; }
  int solve_offset() const { return vocab_size * vocab_size; }
  int style_offset() const { return vocab_size * vocab_size + language_count; }

  bool operator==(const PolicyDims&) const = default;
};

// Which of the three independent style choices a decision controls.
enum class StyleAspect : int { format = 0, language = 1, repetition = 2 };

// The toy stochastic policy. Translation rows are categorical logits over
// the target alphabet (row index = source token id); solve and style logits
// are per-language Bernoulli logits. All log-probabilities and gradients are
// analytic.
struct SimPolicy {
  PolicyDims dims;
  std::vector<double> trans_logits;  // V*V, row-major
  std::vector<double> solve_logits;  // one per language, indexed by the
                                     // language the question is read in
  std::vector<double> style_logits;  // language * 3 + aspect

  static SimPolicy zeros(PolicyDims dims);

  double trans_at(int src, int tgt) const { return trans_logits[src * dims.vocab_size + tgt]; }
  double& trans_at(int src, int tgt) { return trans_logits[src * dims.vocab_size + tgt]; }
  double style_at(int lang, StyleAspect a) const {
    return style_logits[lang * 3 + static_cast<int>(a)];
  }
  double& style_at(int lang, StyleAspect a) {
    return style_logits[lang * 3 + static_cast<int>(a)];
  }

  std::vector<double> flatten() const;
  static SimPolicy unflatten(PolicyDims dims, std::span<const double> params);
};

enum class DecisionKind : std::uint8_t {
  trans_token,        // categorical over the target alphabet
  style_format,       // Bernoulli, 1 = well-formed
  style_language,     // Bernoulli, 1 = correct alphabet
  style_repetition,   // Bernoulli, 1 = no injected repetition
  solve_choice,       // Bernoulli, 1 = SOLVE, 0 = GUESS
  guess_pick,         // uniform over the answer range; no parameters
  solve_outcome,      // world-determined success draw; no parameters
};

struct Decision {
  DecisionKind kind;
  int index = 0;        // source token id (trans) or language index (style/solve)
  int chosen = 0;       // category index / Bernoulli outcome / answer offset
  int domain = 2;       // number of categories
  double fixed_logp = 0.0;    // log-prob of parameterless decisions
  double sampled_logp = 0.0;  // log-prob under the sampling-time parameters
};

// Everything sample_response needs to know about its prompt. The fallback
// answer keeps a failed parse verifiably wrong for the original question.
struct ResponseTask {
  std::string question_text;
  int question_lang = 0;  // language the question is expected to parse in
  int think_lang = 1;     // language the reasoning trace should be written in
  int off_lang = 0;       // alphabet used when the language decision fails
  long long fallback_wrong_answer = 0;
  std::uint64_t uid = 0;  // seeds the deterministic think-block pattern
};

struct DecisionTrace {
  enum class Kind { translation, response } kind = Kind::response;
  std::vector<Decision> decisions;
  std::string rendered_text;
  // Rendering context, so a stored trace re-renders byte-identically.
  ResponseTask task;        // response traces
  int translation_lang = 1; // translation traces: target language index
  int question_id = -1;

  std::vector<double> sampled_logps() const;
};

// One categorical decision per source token, wrapped in translation tags.
std::pair<std::string, DecisionTrace> sample_translation(const synth::World& world,
                                                         const synth::SynthQuestion& q,
                                                         int tgt_lang,
                                                         const SimPolicy& params, Rng& rng);

// Decisions in order: format, language, no-repetition, SOLVE-vs-GUESS, then
// either a uniform guess or a world-difficulty success draw. Rendering
// produces a think block, optional injected repetition, and a boxed answer.
// SOLVE answers the semantics the question text decodes to (correct with the
// world's per-question success probability); an unparseable question yields
// the task's fallback wrong answer.
std::pair<std::string, DecisionTrace> sample_response(const synth::World& world,
                                                      const ResponseTask& task,
                                                      const SimPolicy& params, Rng& rng);

// Deterministic re-rendering of a stored trace.
std::string render_trace(const synth::World& world, const DecisionTrace& trace);

double decision_logp(const Decision& d, const SimPolicy& params);

// Total trace log-prob under `params`; optionally exposes the per-decision
// terms. Throws std::invalid_argument when the trace does not fit the
// parameter dimensions.
double logprob_of(const DecisionTrace& trace, const SimPolicy& params,
                  std::vector<double>* per_decision = nullptr);

// d(logp of decision)/d(params), scaled by `coeff`, accumulated into `grad`
// (flattened layout). Categorical rows use 1{chosen} - softmax; Bernoulli
// uses chosen - sigmoid.
void accumulate_decision_gradient(const Decision& d, const SimPolicy& params, double coeff,
                                  std::span<double> grad);

// Dense d(total trace logp)/d(params).
std::vector<double> analytic_param_gradients(const DecisionTrace& trace, const SimPolicy& params);

}  // namespace transloop::policy
