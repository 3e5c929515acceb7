#include "transloop/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace transloop::grpo {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

}  // namespace

void GrpoConfig::validate() const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("grpo: clip_epsilon must be in (0,1)");
  }
  if (kl_beta < 0.0) throw std::invalid_argument("grpo: kl_beta must be >= 0");
  if (!(std_epsilon > 0.0)) throw std::invalid_argument("grpo: std_epsilon must be > 0");
}

std::vector<double> group_advantages(std::span<const double> rewards, double std_epsilon) {
  if (rewards.size() < 2) throw std::invalid_argument("group_advantages: need at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  const double denom = std::sqrt(var) + std_epsilon;
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const double centered = rewards[i] - mean;
    adv[i] = centered == 0.0 ? 0.0 : centered / denom;
  }
  return adv;
}

std::vector<double> importance_ratios(std::span<const double> logp_new,
                                      std::span<const double> logp_old) {
  check_lengths(logp_new, logp_old, "importance_ratios");
  std::vector<double> out(logp_new.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = std::exp(logp_new[t] - logp_old[t]);
  return out;
}

std::vector<double> kl_penalty_terms(std::span<const double> logp_new,
                                     std::span<const double> logp_ref) {
  check_lengths(logp_new, logp_ref, "kl_penalty_terms");
  std::vector<double> out(logp_new.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double d = logp_ref[t] - logp_new[t];
    out[t] = std::exp(d) - d - 1.0;
  }
  return out;
}

double grpo_objective(std::span<const RolloutGroup> groups, const GrpoConfig& cfg) {
  cfg.validate();
  if (groups.empty()) throw std::invalid_argument("grpo_objective: no groups");

  double group_sum = 0.0;
  for (const auto& g : groups) {
    std::vector<double> rewards;
    rewards.reserve(g.rollouts.size());
    for (const auto& r : g.rollouts) rewards.push_back(r.reward);
    const std::vector<double> adv = group_advantages(rewards, cfg.std_epsilon);

    double rollout_sum = 0.0;
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const Rollout& r = g.rollouts[i];
      if (r.token_count() == 0) throw std::invalid_argument("grpo_objective: empty rollout");
      check_lengths(r.logp_new, r.logp_old, "grpo_objective");
      check_lengths(r.logp_new, r.logp_ref, "grpo_objective");

      double token_sum = 0.0;
      for (std::size_t t = 0; t < r.token_count(); ++t) {
        const double rho = std::exp(r.logp_new[t] - r.logp_old[t]);
        const double clipped = clip(rho, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
        const double surrogate = std::min(rho * adv[i], clipped * adv[i]);
        const double d = r.logp_ref[t] - r.logp_new[t];
        const double kl = std::exp(d) - d - 1.0;
        token_sum += surrogate - cfg.kl_beta * kl;
      }
      rollout_sum += token_sum / static_cast<double>(r.token_count());
    }
    group_sum += rollout_sum / static_cast<double>(g.rollouts.size());
  }
  const double objective = group_sum / static_cast<double>(groups.size());
  return -objective;
}

RolloutGroup materialize(const TracedGroup& group, const policy::SimPolicy& params) {
  RolloutGroup out;
  out.prompt_id = group.prompt_id;
  out.rollouts.reserve(group.rollouts.size());
  for (const auto& tr : group.rollouts) {
    Rollout r;
    policy::logprob_of(tr.trace, params, &r.logp_new);
    r.logp_old = tr.logp_old;
    r.logp_ref = tr.logp_ref;
    r.reward = tr.reward;
    out.rollouts.push_back(std::move(r));
  }
  return out;
}

double traced_loss(std::span<const TracedGroup> groups, const policy::SimPolicy& params,
                   const GrpoConfig& cfg) {
  std::vector<RolloutGroup> mat;
  mat.reserve(groups.size());
  for (const auto& g : groups) mat.push_back(materialize(g, params));
  return grpo_objective(mat, cfg);
}

std::vector<double> grpo_gradient(std::span<const TracedGroup> groups,
                                  const policy::SimPolicy& params, const GrpoConfig& cfg) {
  cfg.validate();
  if (groups.empty()) throw std::invalid_argument("grpo_gradient: no groups");

  std::vector<double> grad(params.dims.param_count(), 0.0);
  const double group_weight = 1.0 / static_cast<double>(groups.size());

  std::vector<double> logp_new;
  for (const auto& g : groups) {
    std::vector<double> rewards;
    rewards.reserve(g.rollouts.size());
    for (const auto& r : g.rollouts) rewards.push_back(r.reward);
    const std::vector<double> adv = group_advantages(rewards, cfg.std_epsilon);
    const double rollout_weight = group_weight / static_cast<double>(g.rollouts.size());

    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const TracedRollout& r = g.rollouts[i];
      policy::logprob_of(r.trace, params, &logp_new);
      if (logp_new.size() != r.logp_old.size() || logp_new.size() != r.logp_ref.size()) {
        throw std::invalid_argument("grpo_gradient: trace/logp length mismatch");
      }
      const double token_weight = rollout_weight / static_cast<double>(logp_new.size());

      for (std::size_t t = 0; t < logp_new.size(); ++t) {
        const double rho = std::exp(logp_new[t] - r.logp_old[t]);
        const double clipped = clip(rho, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
        // Gradient flows only through the unclipped branch when it is the
        // one the min selects (ties included).
        const bool flows = rho * adv[i] <= clipped * adv[i];
        double dobj_dlogp = flows ? adv[i] * rho : 0.0;
        if (cfg.kl_beta != 0.0) {
          const double d = r.logp_ref[t] - logp_new[t];
          dobj_dlogp += cfg.kl_beta * (std::exp(d) - 1.0);
        }
        const double coeff = -token_weight * dobj_dlogp;  // loss = -objective
        if (coeff != 0.0) {
          policy::accumulate_decision_gradient(r.trace.decisions[t], params, coeff, grad);
        }
      }
    }
  }
  return grad;
}

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> params,
    double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be > 0");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double saved = p[j];
    p[j] = saved + h;
    const double up = f(p);
    p[j] = saved - h;
    const double down = f(p);
    p[j] = saved;
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace transloop::grpo
