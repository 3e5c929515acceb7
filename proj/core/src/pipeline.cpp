#include "transloop/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <stdexcept>

#include "transloop/parallel.hpp"
#include "transloop/rng.hpp"
#include "transloop/textcheck.hpp"

namespace transloop::pipeline {

namespace {

constexpr int kSourceLang = 0;
constexpr int kTargetLang = 1;

// Stream tags so every sampling site draws from its own counter-based seed.
enum StreamTag : std::uint64_t {
  kPhase1Stream = 0xa1,
  kTranslateStream = 0xa2,
  kTgtRolloutStream = 0xa3,
  kEvalStream = 0xa4,
};

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string join_tokens(std::span<const std::string> toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

policy::ResponseTask make_task(const synth::World& world, const synth::SynthQuestion& q,
                               std::string question_text, int question_lang) {
  policy::ResponseTask task;
  task.question_text = std::move(question_text);
  task.question_lang = question_lang;
  task.think_lang = kTargetLang;
  task.off_lang = kSourceLang;
  task.fallback_wrong_answer = q.gold_answer + 1;
  task.uid = mix_seed({static_cast<std::uint64_t>(q.id), 0x7a5cu});
  return task;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (kind != "adam" && kind != "sgd") {
    throw std::invalid_argument("optimizer: kind must be adam or sgd");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("optimizer: adam betas must be in [0,1)");
  }
  if (!(adam_epsilon > 0.0)) throw std::invalid_argument("optimizer: adam_epsilon must be > 0");
}

void PipelineConfig::validate() const {
  if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("pipeline: theta must be in [0,1]");
  if (group_size < 2) throw std::invalid_argument("pipeline: group_size must be >= 2");
  if (translation_candidates < 1) {
    throw std::invalid_argument("pipeline: translation_candidates must be >= 1");
  }
  if (iterations < 0) throw std::invalid_argument("pipeline: iterations must be >= 0");
  if (eval_samples_per_question < 1) {
    throw std::invalid_argument("pipeline: eval_samples_per_question must be >= 1");
  }
  if (workers < 1) throw std::invalid_argument("pipeline: workers must be >= 1");
  grpo.validate();
  optimizer.validate();
}

policy::SimPolicy initial_policy(const synth::World& world, const PipelineConfig& cfg) {
  policy::PolicyDims dims{world.cfg.vocab_size, static_cast<int>(world.languages.size())};
  policy::SimPolicy pol = policy::SimPolicy::zeros(dims);
  for (int l = 0; l < dims.language_count; ++l) {
    pol.solve_logits[l] = l == kSourceLang ? cfg.init_solve_logit_source
                                           : cfg.init_solve_logit_target;
    for (int a = 0; a < 3; ++a) pol.style_logits[l * 3 + a] = cfg.init_style_logit;
  }
  return pol;
}

reward::ScoringContext make_scoring_context(const synth::World& world,
                                            const synth::SynthQuestion& q, int target_lang) {
  reward::ScoringContext ctx;
  ctx.target_language = world.languages[target_lang].code;
  ctx.gold_answer = std::to_string(q.gold_answer);
  ctx.repetition_cfg = world.cfg.repetition;
  ctx.language_profiles = synth::make_language_profiles(world);
  return ctx;
}

Phase1Result phase1_filter(const synth::World& world, const policy::SimPolicy& pol,
                           const PipelineConfig& cfg, int iteration, RolloutSink* sink) {
  const std::size_t n = world.questions.size();
  if (n == 0) throw std::invalid_argument("phase1_filter: empty question pool");

  struct Slot {
    std::vector<ScoredRollout> rollouts;
    double r_avg = 0.0;
  };
  std::vector<Slot> slots(n);

  parallel_for(n, cfg.workers, [&](std::size_t qi) {
    const synth::SynthQuestion& q = world.questions[qi];
    const reward::ScoringContext ctx = make_scoring_context(world, q, kTargetLang);
    const policy::ResponseTask task =
        make_task(world, q, join_tokens(q.source_tokens), kSourceLang);

    Slot& slot = slots[qi];
    slot.rollouts.reserve(cfg.group_size);
    double sum = 0.0;
    for (int g = 0; g < cfg.group_size; ++g) {
      Rng rng(mix_seed({cfg.seed, static_cast<std::uint64_t>(iteration), kPhase1Stream,
                        static_cast<std::uint64_t>(q.id), static_cast<std::uint64_t>(g)}));
      auto [text, trace] = policy::sample_response(world, task, pol, rng);
      ScoredRollout r;
      r.trace = std::move(trace);
      r.breakdown = reward::score_response(text, ctx);
      r.r_final = reward::compose_final(r.breakdown).value;
      r.question_id = q.id;
      sum += r.r_final;
      slot.rollouts.push_back(std::move(r));
    }
    slot.r_avg = sum / cfg.group_size;
  });

  Phase1Result out;
  double total = 0.0;
  for (std::size_t qi = 0; qi < n; ++qi) {
    const synth::SynthQuestion& q = world.questions[qi];
    Slot& slot = slots[qi];
    total += slot.r_avg;

    if (sink) {
      for (const ScoredRollout& r : slot.rollouts) {
        const std::vector<double> lps = r.trace.sampled_logps();
        RolloutLogEntry e;
        e.iteration = iteration;
        e.phase = 1;
        e.question_id = q.id;
        e.kind = "cross";
        e.text = &r.trace.rendered_text;
        e.breakdown = &r.breakdown;
        e.reward = r.r_final;
        e.logprobs = &lps;
        sink->write(e);
      }
    }

    const bool retained = slot.r_avg >= cfg.theta;
    out.decisions.push_back({q.id, slot.r_avg, retained});
    if (retained) {
      out.retained_ids.push_back(q.id);
      for (ScoredRollout& r : slot.rollouts) out.d_cross.push_back(std::move(r));
    }
  }
  out.mean_final_reward = total / static_cast<double>(n);
  return out;
}

std::pair<bool, std::string> validate_translation_candidate(const synth::World& world,
                                                            std::string_view candidate_text,
                                                            int target_lang) {
  const auto content = textcheck::extract_translation(candidate_text);
  if (!content) return {false, ""};
  const auto profiles = synth::make_language_profiles(world);
  const auto guess = textcheck::identify_language(*content, profiles);
  if (guess.code != world.languages[target_lang].code || guess.confidence < 0.9) {
    return {false, ""};
  }
  return {true, *content};
}

Phase2Result phase2_translate_and_score(const synth::World& world,
                                        std::span<const int> retained_ids,
                                        const policy::SimPolicy& pol, const PipelineConfig& cfg,
                                        int iteration, RolloutSink* sink) {
  struct CandidateSlot {
    TranslationSample sample;
    std::vector<ScoredRollout> rollouts;
  };
  const std::size_t total = retained_ids.size() * static_cast<std::size_t>(cfg.translation_candidates);
  std::vector<CandidateSlot> slots(total);

  parallel_for(total, cfg.workers, [&](std::size_t idx) {
    const int qid = retained_ids[idx / cfg.translation_candidates];
    const int cand = static_cast<int>(idx % cfg.translation_candidates);
    const synth::SynthQuestion& q = world.questions[qid];

    Rng trans_rng(mix_seed({cfg.seed, static_cast<std::uint64_t>(iteration), kTranslateStream,
                            static_cast<std::uint64_t>(qid), static_cast<std::uint64_t>(cand)}));
    auto [text, trace] = policy::sample_translation(world, q, kTargetLang, pol, trans_rng);

    CandidateSlot& slot = slots[idx];
    slot.sample.question_id = qid;
    slot.sample.candidate_index = cand;
    slot.sample.text = text;
    slot.sample.trace = std::move(trace);

    auto [valid, content] = validate_translation_candidate(world, text, kTargetLang);
    slot.sample.valid = valid;
    if (!valid) {
      slot.sample.r_trans = 0;  // excluded from further processing
      return;
    }

    const reward::ScoringContext ctx = make_scoring_context(world, q, kTargetLang);
    const policy::ResponseTask task = make_task(world, q, content, kTargetLang);
    double acc_sum = 0.0;
    slot.rollouts.reserve(cfg.group_size);
    for (int g = 0; g < cfg.group_size; ++g) {
      Rng rng(mix_seed({cfg.seed, static_cast<std::uint64_t>(iteration), kTgtRolloutStream,
                        static_cast<std::uint64_t>(qid), static_cast<std::uint64_t>(cand),
                        static_cast<std::uint64_t>(g)}));
      auto [rtext, rtrace] = policy::sample_response(world, task, pol, rng);
      ScoredRollout r;
      r.trace = std::move(rtrace);
      r.breakdown = reward::score_response(rtext, ctx);
      r.r_final = reward::compose_final(r.breakdown).value;
      r.question_id = qid;
      r.candidate_index = cand;
      acc_sum += r.breakdown.r_acc;
      slot.rollouts.push_back(std::move(r));
    }
    const double acc = acc_sum / cfg.group_size;
    slot.sample.deferred_acc = acc;
    slot.sample.r_trans = acc > 0.0 ? 1 : 0;
    if (slot.sample.r_trans == 0) {
      slot.rollouts.clear();  // mistranslations must not pair with answers
    }
    slot.sample.tgt_rollout_count = static_cast<int>(slot.rollouts.size());
  });

  Phase2Result out;
  for (CandidateSlot& slot : slots) {
    if (sink) {
      const std::vector<double> lps = slot.sample.trace.sampled_logps();
      RolloutLogEntry e;
      e.iteration = iteration;
      e.phase = 2;
      e.question_id = slot.sample.question_id;
      e.candidate_index = slot.sample.candidate_index;
      e.kind = "trans";
      e.text = &slot.sample.text;
      e.reward = slot.sample.r_trans;
      e.logprobs = &lps;
      sink->write(e);
      for (const ScoredRollout& r : slot.rollouts) {
        const std::vector<double> rlps = r.trace.sampled_logps();
        RolloutLogEntry re;
        re.iteration = iteration;
        re.phase = 2;
        re.question_id = r.question_id;
        re.candidate_index = r.candidate_index;
        re.kind = "tgt";
        re.text = &r.trace.rendered_text;
        re.breakdown = &r.breakdown;
        re.reward = r.r_final;
        re.logprobs = &rlps;
        sink->write(re);
      }
    }
    for (ScoredRollout& r : slot.rollouts) out.d_tgt.push_back(std::move(r));
    out.d_trans.push_back(std::move(slot.sample));
  }
  return out;
}

Optimizer::Optimizer(const OptimizerConfig& cfg, int param_count)
    : cfg_(cfg), m_(param_count, 0.0), v_(param_count, 0.0) {}

policy::SimPolicy Optimizer::step(const policy::SimPolicy& pol, std::span<const double> grad) {
  std::vector<double> params = pol.flatten();
  if (params.size() != grad.size() || params.size() != m_.size()) {
    throw std::invalid_argument("Optimizer::step: size mismatch");
  }
  if (cfg_.kind == "sgd") {
    for (std::size_t j = 0; j < params.size(); ++j) params[j] -= cfg_.learning_rate * grad[j];
  } else {
    ++t_;
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t j = 0; j < params.size(); ++j) {
      m_[j] = b1 * m_[j] + (1.0 - b1) * grad[j];
      v_[j] = b2 * v_[j] + (1.0 - b2) * grad[j] * grad[j];
      const double mhat = m_[j] / bc1;
      const double vhat = v_[j] / bc2;
      params[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_epsilon);
    }
  }
  return policy::SimPolicy::unflatten(pol.dims, params);
}

namespace {

grpo::TracedRollout to_traced(const policy::DecisionTrace& trace, double reward,
                              const policy::SimPolicy& ref) {
  grpo::TracedRollout r;
  r.trace = trace;
  r.logp_old = trace.sampled_logps();
  policy::logprob_of(trace, ref, &r.logp_ref);
  r.reward = reward;
  return r;
}

}  // namespace

UpdateResult assemble_and_update(const synth::World& world, const DatasetTriple& triple,
                                 const policy::SimPolicy& pol, const policy::SimPolicy& ref,
                                 Optimizer& opt, const PipelineConfig& cfg) {
  (void)world;
  std::vector<grpo::TracedGroup> groups;

  auto group_rollouts = [&](std::span<const ScoredRollout> rollouts, const char* prefix) {
    // Rollouts arrive ordered by (question, candidate); split on boundaries.
    std::size_t begin = 0;
    while (begin < rollouts.size()) {
      std::size_t end = begin;
      while (end < rollouts.size() && rollouts[end].question_id == rollouts[begin].question_id &&
             rollouts[end].candidate_index == rollouts[begin].candidate_index) {
        ++end;
      }
      grpo::TracedGroup g;
      g.prompt_id = std::string(prefix) + std::to_string(rollouts[begin].question_id);
      if (rollouts[begin].candidate_index >= 0) {
        g.prompt_id += "/" + std::to_string(rollouts[begin].candidate_index);
      }
      for (std::size_t i = begin; i < end; ++i) {
        g.rollouts.push_back(to_traced(rollouts[i].trace, rollouts[i].r_final, ref));
      }
      groups.push_back(std::move(g));
      begin = end;
    }
  };

  group_rollouts(triple.d_cross, "cross/");
  group_rollouts(triple.d_tgt, "tgt/");

  // Translation groups: all candidates of one question, rewarded by r_trans.
  std::size_t begin = 0;
  while (begin < triple.d_trans.size()) {
    std::size_t end = begin;
    while (end < triple.d_trans.size() &&
           triple.d_trans[end].question_id == triple.d_trans[begin].question_id) {
      ++end;
    }
    grpo::TracedGroup g;
    g.prompt_id = "trans/" + std::to_string(triple.d_trans[begin].question_id);
    for (std::size_t i = begin; i < end; ++i) {
      g.rollouts.push_back(to_traced(triple.d_trans[i].trace,
                                     static_cast<double>(triple.d_trans[i].r_trans), ref));
    }
    groups.push_back(std::move(g));
    begin = end;
  }

  UpdateResult result{pol, 0.0, 0, 0};
  std::erase_if(groups, [&](const grpo::TracedGroup& g) {
    if (g.rollouts.size() < 2) {
      std::cerr << "warning: dropping group " << g.prompt_id << " with " << g.rollouts.size()
                << " rollout(s)\n";
      ++result.dropped_groups;
      return true;
    }
    return false;
  });
  result.groups = groups.size();
  if (groups.empty()) return result;  // nothing to learn from this iteration

  result.loss = grpo::traced_loss(groups, pol, cfg.grpo);
  const std::vector<double> grad = grpo::grpo_gradient(groups, pol, cfg.grpo);
  result.policy = opt.step(pol, grad);
  return result;
}

double translation_exact_match(const synth::World& world, const policy::SimPolicy& pol,
                               int target_lang) {
  (void)target_lang;  // the reference translation keeps token indices
  const auto& src = world.source_language();
  const int v = pol.dims.vocab_size;
  // Per-row probability of the index-preserving token.
  std::vector<double> diag(v);
  for (int s = 0; s < v; ++s) {
    double mx = pol.trans_at(s, 0);
    for (int j = 1; j < v; ++j) mx = std::max(mx, pol.trans_at(s, j));
    double sum = 0.0;
    for (int j = 0; j < v; ++j) sum += std::exp(pol.trans_at(s, j) - mx);
    diag[s] = std::exp(pol.trans_at(s, s) - mx) / sum;
  }
  double total = 0.0;
  for (const auto& q : world.questions) {
    double p = 1.0;
    for (const auto& tok : q.source_tokens) p *= diag[src.token_index(tok)];
    total += p;
  }
  return total / static_cast<double>(world.questions.size());
}

std::vector<metrics::EvalRecord> evaluate_policy(const synth::World& world,
                                                 const policy::SimPolicy& pol,
                                                 const PipelineConfig& cfg, int iteration) {
  const std::size_t n = world.questions.size();
  const int e = cfg.eval_samples_per_question;
  std::vector<metrics::EvalRecord> records(n * e);

  parallel_for(n, cfg.workers, [&](std::size_t qi) {
    const synth::SynthQuestion& q = world.questions[qi];
    const std::vector<std::string> tgt_tokens =
        synth::render_question(q, world.languages[kTargetLang]);
    const reward::ScoringContext ctx = make_scoring_context(world, q, kTargetLang);
    const policy::ResponseTask task = make_task(world, q, join_tokens(tgt_tokens), kTargetLang);
    for (int s = 0; s < e; ++s) {
      Rng rng(mix_seed({cfg.seed, static_cast<std::uint64_t>(iteration), kEvalStream,
                        static_cast<std::uint64_t>(q.id), static_cast<std::uint64_t>(s)}));
      auto [text, trace] = policy::sample_response(world, task, pol, rng);
      const reward::RewardBreakdown b = reward::score_response(text, ctx);
      metrics::EvalRecord& rec = records[qi * e + s];
      rec.question_id = q.id;
      rec.subset = std::string(synth::op_name(q.op));
      rec.correct = b.r_acc == 1;
      rec.language_consistent = b.r_lang == 1;
      rec.repetitive = b.r_rep == 0;
    }
  });
  return records;
}

namespace {

IterationRecord make_record(const synth::World& world, const policy::SimPolicy& pol,
                            const PipelineConfig& cfg, int iteration) {
  IterationRecord rec;
  rec.iteration = iteration;
  rec.translation_exact_match = translation_exact_match(world, pol, kTargetLang);
  const auto records = evaluate_policy(world, pol, cfg, iteration);
  const auto report = metrics::lc_acc_metrics(records);
  rec.eval_lc = report.macro.lc;
  rec.eval_acc = report.macro.acc;
  rec.eval_lc_and_acc = report.macro.lc_and_acc;
  return rec;
}

}  // namespace

RunResult run_training(const synth::World& world, const PipelineConfig& cfg, RolloutSink* sink,
                       const IterationObserver& on_iteration) {
  cfg.validate();
  if (world.languages.size() < 2) throw std::invalid_argument("run_training: need two languages");

  RunResult result;
  result.final_policy = initial_policy(world, cfg);
  Optimizer opt(cfg.optimizer, result.final_policy.dims.param_count());

  result.history.push_back(make_record(world, result.final_policy, cfg, 0));

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const policy::SimPolicy ref = result.final_policy;  // refrozen each iteration

    Phase1Result p1 = phase1_filter(world, result.final_policy, cfg, iter, sink);
    Phase2Result p2 = phase2_translate_and_score(world, p1.retained_ids, result.final_policy, cfg,
                                                 iter, sink);

    // Dataset hygiene: every candidate is recorded, and no target-language
    // rollout may trace back to a rejected translation.
    if (p2.d_trans.size() !=
        p1.retained_ids.size() * static_cast<std::size_t>(cfg.translation_candidates)) {
      throw std::runtime_error("hygiene violation: |d_trans| != K * |retained|");
    }
    for (const auto& sample : p2.d_trans) {
      if (sample.r_trans == 0 && sample.tgt_rollout_count != 0) {
        throw std::runtime_error("hygiene violation: rejected translation has rollouts");
      }
    }
    for (const auto& r : p2.d_tgt) {
      const auto it = std::find(p1.retained_ids.begin(), p1.retained_ids.end(), r.question_id);
      if (it == p1.retained_ids.end() || r.candidate_index < 0) {
        throw std::runtime_error("hygiene violation: d_tgt rollout from unretained question");
      }
      const std::size_t slot = static_cast<std::size_t>(it - p1.retained_ids.begin());
      const TranslationSample& sample =
          p2.d_trans[slot * cfg.translation_candidates + r.candidate_index];
      if (sample.r_trans != 1) {
        throw std::runtime_error("hygiene violation: d_tgt rollout from r_trans=0 candidate");
      }
    }

    DatasetTriple triple;
    triple.d_cross = std::move(p1.d_cross);
    triple.d_trans = std::move(p2.d_trans);
    triple.d_tgt = std::move(p2.d_tgt);

    UpdateResult update = assemble_and_update(world, triple, result.final_policy, ref, opt, cfg);
    result.final_policy = std::move(update.policy);

    IterationRecord rec = make_record(world, result.final_policy, cfg, iter);
    rec.retained = static_cast<int>(p1.retained_ids.size());
    rec.d_cross_size = triple.d_cross.size();
    rec.d_trans_size = triple.d_trans.size();
    rec.d_tgt_size = triple.d_tgt.size();
    rec.mean_phase1_final = p1.mean_final_reward;
    rec.loss = update.loss;
    rec.translations.reserve(triple.d_trans.size());
    for (const auto& s : triple.d_trans) {
      rec.translations.push_back({s.question_id, s.candidate_index, s.valid, s.r_trans,
                                  s.deferred_acc.value_or(0.0), s.tgt_rollout_count});
    }
    result.history.push_back(std::move(rec));
    if (on_iteration) on_iteration(iter, result.final_policy);
  }
  return result;
}

std::string metrics_csv(std::span<const IterationRecord> history) {
  std::string out =
      "iter,retained,d_cross,d_trans,d_tgt,mean_r_final,loss,"
      "trans_exact_match,lc,acc,lc_and_acc\n";
  for (const auto& r : history) {
    out += std::to_string(r.iteration);
    out += ',';
    out += std::to_string(r.retained);
    out += ',';
    out += std::to_string(r.d_cross_size);
    out += ',';
    out += std::to_string(r.d_trans_size);
    out += ',';
    out += std::to_string(r.d_tgt_size);
    out += ',';
    out += format_double(r.mean_phase1_final);
    out += ',';
    out += format_double(r.loss);
    out += ',';
    out += format_double(r.translation_exact_match);
    out += ',';
    out += format_double(r.eval_lc);
    out += ',';
    out += format_double(r.eval_acc);
    out += ',';
    out += format_double(r.eval_lc_and_acc);
    out += '\n';
  }
  return out;
}

}  // namespace transloop::pipeline
