#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "transloop/grpo.hpp"
#include "transloop/metrics.hpp"
#include "transloop/policy.hpp"
#include "transloop/reward.hpp"
#include "transloop/synthworld.hpp"

namespace transloop::pipeline {

struct OptimizerConfig {
  std::string kind = "adam";  // "adam" or "sgd"
  double learning_rate = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

struct PipelineConfig {
  double theta = 1.0 / 3.0;       // phase-1 retention threshold on r_avg
  int group_size = 6;             // G: responses per question
  int translation_candidates = 4; // K: translations per retained question
  int iterations = 200;
  // Cold-start initialization: the policy starts able to read the source
  // language and with partially reliable output habits, rather than from a
  // blank slate.
  double init_style_logit = 1.2;
  double init_solve_logit_source = 2.5;
  double init_solve_logit_target = 0.0;
  int eval_samples_per_question = 2;
  int workers = 1;
  grpo::GrpoConfig grpo;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;

  void validate() const;
};

struct FilterDecision {
  int question_id = 0;
  double r_avg = 0.0;
  bool retained = false;
};

// One scored response rollout, grouped later by its prompt.
struct ScoredRollout {
  policy::DecisionTrace trace;
  reward::RewardBreakdown breakdown;
  double r_final = 0.0;
  int question_id = 0;
  int candidate_index = -1;  // >= 0 for target-language rollouts
};

struct TranslationSample {
  int question_id = 0;
  int candidate_index = 0;
  std::string text;
  policy::DecisionTrace trace;
  bool valid = false;                // passed tag + language checks
  int r_trans = 0;
  std::optional<double> deferred_acc;  // mean r_acc of its reasoning rollouts
  int tgt_rollout_count = 0;
};

struct DatasetTriple {
  std::vector<ScoredRollout> d_cross;
  std::vector<TranslationSample> d_trans;
  std::vector<ScoredRollout> d_tgt;
};

struct Phase1Result {
  std::vector<int> retained_ids;
  std::vector<FilterDecision> decisions;
  std::vector<ScoredRollout> d_cross;
  double mean_final_reward = 0.0;  // over all sampled rollouts
};

struct Phase2Result {
  std::vector<TranslationSample> d_trans;
  std::vector<ScoredRollout> d_tgt;
};

// Summary of one candidate kept in the run history (traces dropped).
struct TranslationSummary {
  int question_id = 0;
  int candidate_index = 0;
  bool valid = false;
  int r_trans = 0;
  double deferred_acc = 0.0;
  int tgt_rollout_count = 0;
};

struct IterationRecord {
  int iteration = 0;
  int retained = 0;
  std::size_t d_cross_size = 0;
  std::size_t d_trans_size = 0;
  std::size_t d_tgt_size = 0;
  double mean_phase1_final = 0.0;
  double loss = 0.0;
  double translation_exact_match = 0.0;  // mean prob of the exact reference translation
  double eval_lc = 0.0;
  double eval_acc = 0.0;
  double eval_lc_and_acc = 0.0;
  std::vector<TranslationSummary> translations;
};

struct RunResult {
  std::vector<IterationRecord> history;  // [0] is the pre-training baseline
  policy::SimPolicy final_policy;
};

// Streaming consumer for rollout logs; entries arrive in a deterministic
// order independent of worker count.
struct RolloutLogEntry {
  int iteration = 0;
  int phase = 0;
  int question_id = 0;
  int candidate_index = -1;
  const char* kind = "cross";  // cross | trans | tgt
  const std::string* text = nullptr;
  const reward::RewardBreakdown* breakdown = nullptr;  // null for trans entries
  double reward = 0.0;
  const std::vector<double>* logprobs = nullptr;
};

class RolloutSink {
 public:
  virtual ~RolloutSink() = default;
  virtual void write(const RolloutLogEntry& entry) = 0;
};

policy::SimPolicy initial_policy(const synth::World& world, const PipelineConfig& cfg);

reward::ScoringContext make_scoring_context(const synth::World& world, const synth::SynthQuestion& q,
                                            int target_lang);

// Phase 1: sample G target-language responses per source-language question,
// retain questions whose mean final reward clears theta, and keep the
// retained questions' rollouts for training.
Phase1Result phase1_filter(const synth::World& world, const policy::SimPolicy& pol,
                           const PipelineConfig& cfg, int iteration,
                           RolloutSink* sink = nullptr);

// Phase 2: K translation candidates per retained question. Invalid
// candidates take r_trans = 0 with no reasoning rollouts; valid candidates
// earn r_trans = 1 iff any of their G reasoning rollouts is correct, and
// only those rollouts enter d_tgt. All K candidates enter d_trans.
Phase2Result phase2_translate_and_score(const synth::World& world,
                                        std::span<const int> retained_ids,
                                        const policy::SimPolicy& pol, const PipelineConfig& cfg,
                                        int iteration, RolloutSink* sink = nullptr);

// Tag + language gate for a translation candidate; exposed for direct tests.
std::pair<bool, std::string> validate_translation_candidate(const synth::World& world,
                                                            std::string_view candidate_text,
                                                            int target_lang);

// Regroup the three pools by prompt, compute group advantages, and take one
// optimizer step. Groups smaller than two rollouts are dropped with a
// warning.
struct UpdateResult {
  policy::SimPolicy policy;
  double loss = 0.0;
  std::size_t groups = 0;
  std::size_t dropped_groups = 0;
};

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, int param_count);
  policy::SimPolicy step(const policy::SimPolicy& pol, std::span<const double> grad);

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

UpdateResult assemble_and_update(const synth::World& world, const DatasetTriple& triple,
                                 const policy::SimPolicy& pol, const policy::SimPolicy& ref,
                                 Optimizer& opt, const PipelineConfig& cfg);

// Mean over questions of the probability that the policy translates the
// question exactly (product of per-token reference-translation probs).
double translation_exact_match(const synth::World& world, const policy::SimPolicy& pol,
                               int target_lang);

// Sampled evaluation on target-language questions; subsets are operators.
std::vector<metrics::EvalRecord> evaluate_policy(const synth::World& world,
                                                 const policy::SimPolicy& pol,
                                                 const PipelineConfig& cfg, int iteration);

// The full loop: phase1 -> phase2 -> update, with the reference policy
// refrozen at the start of every iteration. Deterministic given the seed
// and independent of cfg.workers. Throws std::runtime_error if a dataset
// hygiene invariant is violated. `on_iteration` observes the updated policy
// after each iteration (checkpointing); it must not mutate anything.
using IterationObserver = std::function<void(int iteration, const policy::SimPolicy&)>;

RunResult run_training(const synth::World& world, const PipelineConfig& cfg,
                       RolloutSink* sink = nullptr,
                       const IterationObserver& on_iteration = {});

// CSV of the run history (header + one row per record, '.' decimals).
std::string metrics_csv(std::span<const IterationRecord> history);

}  // namespace transloop::pipeline
