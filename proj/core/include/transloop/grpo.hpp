#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "transloop/policy.hpp"

namespace transloop::grpo {

struct GrpoConfig {
  double clip_epsilon = 0.2;
  double kl_beta = 0.001;
  double std_epsilon = 1e-8;

  void validate() const;  // clip_epsilon in (0,1), kl_beta >= 0, std_epsilon > 0
};

// One sampled response: per-token log-probs under the current, sampling-time
// and reference policies, plus its scalar reward.
struct Rollout {
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  double reward = 0.0;

  std::size_t token_count() const { return logp_new.size(); }
};

struct RolloutGroup {
  std::string prompt_id;
  std::vector<Rollout> rollouts;
};

// Group-standardized advantages: (r_i - mean) / (popstd + std_epsilon).
// All-equal rewards yield exact zeros. Throws std::invalid_argument when the
// group has fewer than two rollouts.
std::vector<double> group_advantages(std::span<const double> rewards, double std_epsilon);

// exp(logp_new - logp_old), per token. Throws on length mismatch.
std::vector<double> importance_ratios(std::span<const double> logp_new,
                                      std::span<const double> logp_old);

// Per-token nonnegative KL estimate exp(d) - d - 1 with d = logp_ref -
// logp_new. Throws on length mismatch.
std::vector<double> kl_penalty_terms(std::span<const double> logp_new,
                                     std::span<const double> logp_ref);

// Clipped-surrogate loss: per token
//   min(rho * A, clip(rho, 1-eps, 1+eps) * A) - beta * kl
// averaged over tokens, rollouts, then groups, and negated so optimizers
// minimize. Throws on an empty group list.
double grpo_objective(std::span<const RolloutGroup> groups, const GrpoConfig& cfg);

// A rollout that still carries its decision trace, so logp_new can be
// recomputed from policy parameters when taking gradients.
struct TracedRollout {
  policy::DecisionTrace trace;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  double reward = 0.0;
};

struct TracedGroup {
  std::string prompt_id;
  std::vector<TracedRollout> rollouts;
};

// Numeric view of a traced group with logp_new recomputed under `params`.
RolloutGroup materialize(const TracedGroup& group, const policy::SimPolicy& params);

double traced_loss(std::span<const TracedGroup> groups, const policy::SimPolicy& params,
                   const GrpoConfig& cfg);

// Analytic d(loss)/d(params). The clipped min follows the selected branch:
// tokens where the saturated clip branch is strictly smaller contribute no
// gradient; the KL penalty is differentiated through logp_new.
std::vector<double> grpo_gradient(std::span<const TracedGroup> groups,
                                  const policy::SimPolicy& params, const GrpoConfig& cfg);

// Central differences, one coordinate at a time.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> params,
    double h);

}  // namespace transloop::grpo
