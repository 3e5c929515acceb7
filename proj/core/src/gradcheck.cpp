#include "transloop/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "transloop/pipeline.hpp"
#include "transloop/rng.hpp"

namespace transloop::gradcheck {

namespace {

using policy::SimPolicy;

SimPolicy perturbed(const SimPolicy& base, double scale, Rng& rng) {
  std::vector<double> params = base.flatten();
  for (double& p : params) p += scale * (2.0 * rng.next_double() - 1.0);
  return SimPolicy::unflatten(base.dims, params);
}

}  // namespace

SuiteReport run_gradient_check_suite(int instances, std::uint64_t seed, double h,
                                     double tolerance) {
  SuiteReport report;
  grpo::GrpoConfig cfg;  // beta = 0.001, epsilon = 0.2

  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(mix_seed({seed, 0x96adc4ec, static_cast<std::uint64_t>(inst)}));

    synth::WorldConfig wc;
    wc.vocab_size = 5 + static_cast<int>(rng.uniform_int(0, 5));  // <= 10 -> <= 108 params
    wc.question_count = 4;
    wc.value_min = 0;
    wc.value_max = wc.vocab_size - 4;
    const synth::World world = synth::World::build(wc, rng.next_u64());

    SimPolicy params = SimPolicy::zeros({wc.vocab_size, 2});
    {
      std::vector<double> flat = params.flatten();
      for (double& p : flat) p += 0.5 * (2.0 * rng.next_double() - 1.0);
      params = SimPolicy::unflatten(params.dims, flat);
    }
    // Stale sampling-time and reference policies make the ratios and KL term
    // nontrivial. The first three instances get an aggressive shift so a
    // clip boundary is provably crossed.
    const bool force_clip = inst < 3;
    const SimPolicy old_params = perturbed(params, force_clip ? 0.9 : 0.25, rng);
    const SimPolicy ref_params = perturbed(params, 0.3, rng);

    std::vector<grpo::TracedGroup> groups;
    for (int gi = 0; gi < 3; ++gi) {
      grpo::TracedGroup group;
      group.prompt_id = "g" + std::to_string(gi);
      const synth::SynthQuestion& q = world.questions[gi % world.questions.size()];
      const int rollouts = 3;
      for (int ri = 0; ri < rollouts; ++ri) {
        policy::DecisionTrace trace;
        if (gi % 2 == 0) {
          auto [text, t] = policy::sample_translation(world, q, 1, params, rng);
          trace = std::move(t);
        } else {
          policy::ResponseTask task;
          task.question_text = "";
          for (std::size_t i = 0; i < q.source_tokens.size(); ++i) {
            if (i) task.question_text += ' ';
            task.question_text += q.source_tokens[i];
          }
          task.question_lang = 0;
          task.think_lang = 1;
          task.off_lang = 0;
          task.fallback_wrong_answer = q.gold_answer + 1;
          task.uid = static_cast<std::uint64_t>(q.id);
          auto [text, t] = policy::sample_response(world, task, params, rng);
          trace = std::move(t);
        }
        grpo::TracedRollout r;
        policy::logprob_of(trace, old_params, &r.logp_old);
        policy::logprob_of(trace, ref_params, &r.logp_ref);
        r.trace = std::move(trace);
        r.reward = static_cast<double>(rng.uniform_int(0, 2)) / 2.0;
        group.rollouts.push_back(std::move(r));
      }
      // Guarantee reward spread so advantages are nonzero.
      group.rollouts.front().reward = 1.0;
      group.rollouts.back().reward = 0.0;
      if (force_clip) {
        // The max-reward rollout has positive advantage; pinning its first
        // token's old log-prob below the current one puts rho = e^0.5 past
        // the 1+eps boundary, so the clip saturates by construction.
        grpo::TracedRollout& r = group.rollouts.front();
        std::vector<double> lp_new;
        policy::logprob_of(r.trace, params, &lp_new);
        r.logp_old[0] = lp_new[0] - 0.5;
      }
      groups.push_back(std::move(group));
    }

    InstanceReport ir;
    ir.index = inst;
    ir.param_count = params.dims.param_count();

    // Detect saturated clip branches under the sampled batch.
    for (const auto& g : groups) {
      std::vector<double> rewards;
      for (const auto& r : g.rollouts) rewards.push_back(r.reward);
      const auto adv = grpo::group_advantages(rewards, cfg.std_epsilon);
      for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
        std::vector<double> lp_new;
        policy::logprob_of(g.rollouts[i].trace, params, &lp_new);
        for (std::size_t t = 0; t < lp_new.size(); ++t) {
          const double rho = std::exp(lp_new[t] - g.rollouts[i].logp_old[t]);
          if ((rho > 1.0 + cfg.clip_epsilon && adv[i] > 0.0) ||
              (rho < 1.0 - cfg.clip_epsilon && adv[i] < 0.0)) {
            ir.has_active_clipping = true;
          }
        }
      }
    }

    const std::vector<double> analytic = grpo::grpo_gradient(groups, params, cfg);
    const std::vector<double> flat = params.flatten();
    const std::vector<double> numeric = grpo::finite_difference_gradient(
        [&](std::span<const double> p) {
          return grpo::traced_loss(groups, SimPolicy::unflatten(params.dims, p), cfg);
        },
        flat, h);

    for (std::size_t j = 0; j < analytic.size(); ++j) {
      const double denom = std::max({std::abs(analytic[j]), std::abs(numeric[j]), 1e-8});
      const double rel = std::abs(analytic[j] - numeric[j]) / denom;
      if (rel > ir.max_rel_error) {
        ir.max_rel_error = rel;
        ir.worst_coordinate = static_cast<int>(j);
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, ir.max_rel_error);
    if (ir.has_active_clipping) ++report.clipped_instances;
    report.instances.push_back(ir);
  }
  report.passed = report.max_rel_error < tolerance && report.clipped_instances >= 3;
  return report;
}

}  // namespace transloop::gradcheck
