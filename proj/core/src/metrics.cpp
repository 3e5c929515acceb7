#include "transloop/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "transloop/rng.hpp"

namespace transloop::metrics {

LcAccReport lc_acc_metrics(std::span<const EvalRecord> records) {
  if (records.empty()) throw std::invalid_argument("lc_acc_metrics: no records");

  struct Tally {
    long long lc = 0, acc = 0, both = 0, n = 0;
  };
  std::map<std::string, Tally> tallies;
  for (const auto& r : records) {
    Tally& t = tallies[r.subset];
    ++t.n;
    t.lc += r.language_consistent ? 1 : 0;
    t.acc += r.correct ? 1 : 0;
    t.both += (r.correct && r.language_consistent) ? 1 : 0;
  }

  LcAccReport report;
  for (const auto& [subset, t] : tallies) {
    LcAccScores s;
    s.count = static_cast<std::size_t>(t.n);
    s.lc = static_cast<double>(t.lc) / t.n;
    s.acc = static_cast<double>(t.acc) / t.n;
    s.lc_and_acc = static_cast<double>(t.both) / t.n;
    report.per_subset.emplace(subset, s);
    report.macro.lc += s.lc;
    report.macro.acc += s.acc;
    report.macro.lc_and_acc += s.lc_and_acc;
    report.macro.count += s.count;
  }
  const double k = static_cast<double>(report.per_subset.size());
  report.macro.lc /= k;
  report.macro.acc /= k;
  report.macro.lc_and_acc /= k;
  return report;
}

double repetition_rate_among_correct(std::span<const EvalRecord> records) {
  long long correct = 0, repetitive = 0;
  for (const auto& r : records) {
    if (!r.correct) continue;
    ++correct;
    repetitive += r.repetitive ? 1 : 0;
  }
  if (correct == 0) {
    throw std::invalid_argument("repetition_rate_among_correct: no correct records");
  }
  return static_cast<double>(repetitive) / static_cast<double>(correct);
}

NoiseReport false_negative_rate(std::span<const TranslationOutcome> outcomes, double theta_label,
                                long long retained) {
  NoiseReport report;
  report.theta = theta_label;
  report.retained = retained;
  for (const auto& o : outcomes) {
    if (!o.faithful) continue;
    ++report.faithful_total;
    if (o.r_trans == 0) ++report.false_negatives;
  }
  if (report.faithful_total == 0) {
    throw std::invalid_argument("false_negative_rate: no faithful candidates");
  }
  report.rate =
      static_cast<double>(report.false_negatives) / static_cast<double>(report.faithful_total);
  return report;
}

std::vector<NoiseReport> simulate_filter_noise(const NoiseSimConfig& cfg,
                                               std::span<const double> thetas) {
  if (cfg.question_count < 1 || cfg.group_size < 1 || cfg.candidates_per_question < 1) {
    throw std::invalid_argument("simulate_filter_noise: counts must be >= 1");
  }
  struct QuestionDraw {
    double r_avg = 0.0;
    // Per candidate: faithful flag and whether any reasoning rollout succeeded.
    std::vector<std::pair<bool, bool>> candidates;
  };

  std::vector<QuestionDraw> draws(cfg.question_count);
  for (int qi = 0; qi < cfg.question_count; ++qi) {
    Rng rng(mix_seed({cfg.seed, 0x5e15e, static_cast<std::uint64_t>(qi)}));
    const double q = cfg.fixed_q ? *cfg.fixed_q : rng.next_double();

    double reward_sum = 0.0;
    for (int g = 0; g < cfg.group_size; ++g) reward_sum += rng.bernoulli(q) ? 1.0 : 0.1;
    draws[qi].r_avg = reward_sum / cfg.group_size;

    draws[qi].candidates.reserve(cfg.candidates_per_question);
    for (int c = 0; c < cfg.candidates_per_question; ++c) {
      const bool faithful = rng.bernoulli(cfg.faithful_prob);
      bool any_correct = false;
      for (int g = 0; g < cfg.group_size; ++g) {
        // Unfaithful candidates break the semantics, so their rollouts fail.
        any_correct = any_correct || (faithful && rng.bernoulli(q));
      }
      draws[qi].candidates.emplace_back(faithful, any_correct);
    }
  }

  std::vector<NoiseReport> out;
  out.reserve(thetas.size());
  for (double theta : thetas) {
    std::vector<TranslationOutcome> outcomes;
    long long retained = 0;
    for (int qi = 0; qi < cfg.question_count; ++qi) {
      if (draws[qi].r_avg < theta) continue;
      ++retained;
      for (const auto& [faithful, any_correct] : draws[qi].candidates) {
        outcomes.push_back({qi, faithful, any_correct ? 1 : 0});
      }
    }
    out.push_back(false_negative_rate(outcomes, theta, retained));
  }
  return out;
}

std::vector<MexaLayerResult> mexa_alignment(std::span<const std::vector<EmbeddingPair>> layers) {
  std::vector<MexaLayerResult> out;
  out.reserve(layers.size());
  for (const auto& layer : layers) {
    MexaLayerResult r;
    double sum = 0.0;
    for (std::size_t p = 0; p < layer.size(); ++p) {
      const auto& [u, v] = layer[p];
      if (u.size() != v.size()) {
        throw std::invalid_argument("mexa_alignment: dimension mismatch within a pair");
      }
      double dot = 0.0, nu = 0.0, nv = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
      }
      if (nu == 0.0 || nv == 0.0) {
        r.error_pairs.push_back(p);
        continue;
      }
      sum += dot / (std::sqrt(nu) * std::sqrt(nv));
      ++r.pair_count;
    }
    r.mean_cosine = r.pair_count > 0 ? sum / static_cast<double>(r.pair_count) : 0.0;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace transloop::metrics
