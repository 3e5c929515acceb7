#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace transloop::metrics {

struct EvalRecord {
  int question_id = 0;
  std::string subset;  // macro averaging group
  bool correct = false;
  bool language_consistent = false;
  bool repetitive = false;
};

struct LcAccScores {
  double lc = 0.0;
  double acc = 0.0;
  double lc_and_acc = 0.0;
  std::size_t count = 0;
};

struct LcAccReport {
  std::map<std::string, LcAccScores> per_subset;
  LcAccScores macro;  // unweighted mean over subsets
};

// Means of language consistency, correctness, and their conjunction, per
// subset plus the unweighted macro average. Throws std::invalid_argument on
// empty input.
LcAccReport lc_acc_metrics(std::span<const EvalRecord> records);

// Mean of `repetitive` over correct records. Throws std::invalid_argument
// when no record is correct.
double repetition_rate_among_correct(std::span<const EvalRecord> records);

// One translation candidate as the noise analysis sees it: was it
// semantically faithful (oracle verdict), and what deferred reward did the
// pipeline assign.
struct TranslationOutcome {
  int question_id = 0;
  bool faithful = false;
  int r_trans = 0;
};

struct NoiseReport {
  double theta = 0.0;
  long long retained = 0;
  long long faithful_total = 0;
  long long false_negatives = 0;
  double rate = 0.0;
};

// False negative = faithful candidate with r_trans == 0. Throws when there
// are no faithful candidates.
NoiseReport false_negative_rate(std::span<const TranslationOutcome> outcomes, double theta_label,
                                long long retained = 0);

// Monte-Carlo harness for the filtering noise analysis: questions carry a
// latent reasoning competence q (uniform, or fixed); phase-1 survival uses
// the mean of G rewards (1 for a correct rollout, 0.1 otherwise) against
// theta; each retained question then draws candidates that are faithful
// with `faithful_prob`, and a faithful candidate is false-negative when all
// G reasoning rollouts fail. Draws are shared across thetas so retention is
// monotone in theta.
struct NoiseSimConfig {
  int question_count = 2000;
  int group_size = 6;
  int candidates_per_question = 4;
  double faithful_prob = 0.7;
  std::optional<double> fixed_q;
  std::uint64_t seed = 1;
};

std::vector<NoiseReport> simulate_filter_noise(const NoiseSimConfig& cfg,
                                               std::span<const double> thetas);

// Paired embeddings for one layer.
using EmbeddingPair = std::pair<std::vector<double>, std::vector<double>>;

struct MexaLayerResult {
  double mean_cosine = 0.0;          // over valid pairs
  std::size_t pair_count = 0;        // valid pairs
  std::vector<std::size_t> error_pairs;  // zero-vector pairs, excluded
};

// Mean cosine similarity per layer. Throws std::invalid_argument when a
// pair's vectors differ in dimension.
std::vector<MexaLayerResult> mexa_alignment(
    std::span<const std::vector<EmbeddingPair>> layers);

}  // namespace transloop::metrics
