#include "transloop/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "transloop/textcheck.hpp"

namespace transloop::policy {

namespace {

constexpr int kThinkTokens = 24;
constexpr int kRepLineTokens = 25;
constexpr int kRepLineCopies = 6;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double log_sigmoid(double z) { return -softplus(-z); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::span<const double> trans_row(const SimPolicy& p, int src) {
  return std::span<const double>(p.trans_logits).subspan(
      static_cast<std::size_t>(src) * p.dims.vocab_size, p.dims.vocab_size);
}

double log_softmax_at(std::span<const double> logits, int chosen) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return logits[chosen] - mx - std::log(sum);
}

Decision make_bernoulli(DecisionKind kind, int lang, int chosen, double logit) {
  Decision d;
  d.kind = kind;
  d.index = lang;
  d.chosen = chosen;
  d.domain = 2;
  d.sampled_logp = chosen ? log_sigmoid(logit) : log_sigmoid(-logit);
  return d;
}

struct ResponseShape {
  bool fmt_ok = false;
  bool lang_ok = false;
  bool rep_ok = false;
  bool solved = false;
  std::optional<int> guess_offset;
  std::optional<bool> solve_success;
};

ResponseShape shape_from_decisions(const std::vector<Decision>& ds) {
  ResponseShape s;
  if (ds.size() < 4) throw std::invalid_argument("response trace: too few decisions");
  s.fmt_ok = ds[0].chosen == 1;
  s.lang_ok = ds[1].chosen == 1;
  s.rep_ok = ds[2].chosen == 1;
  s.solved = ds[3].chosen == 1;
  for (std::size_t i = 4; i < ds.size(); ++i) {
    if (ds[i].kind == DecisionKind::guess_pick) s.guess_offset = ds[i].chosen;
    if (ds[i].kind == DecisionKind::solve_outcome) s.solve_success = ds[i].chosen == 1;
  }
  return s;
}

std::string render_response(const synth::World& world, const ResponseTask& task,
                            const ResponseShape& s) {
  const auto& think_alphabet =
      world.languages[s.lang_ok ? task.think_lang : task.off_lang].alphabet;
  const int v = static_cast<int>(think_alphabet.size());

  std::string think;
  for (int i = 0; i < kThinkTokens; ++i) {
    if (i) think += ' ';
    think += think_alphabet[(task.uid * 7 + static_cast<std::uint64_t>(i) * 5 + 3) % v];
  }
  if (!s.rep_ok) {
    std::string line;
    for (int i = 0; i < kRepLineTokens; ++i) {
      if (i) line += ' ';
      line += think_alphabet[(task.uid + static_cast<std::uint64_t>(i) * 31) % v];
    }
    for (int c = 0; c < kRepLineCopies; ++c) {
      think += '\n';
      think += line;
    }
  }

  long long answer = 0;
  if (s.solved) {
    const auto decoded = synth::decode_question(
        textcheck::tokenize(task.question_text).tokens,
        world.languages[task.question_lang]);
    if (decoded) {
      const auto [a, op, b] = *decoded;
      const long long truth = synth::apply_op(a, op, b);
      answer = (s.solve_success && *s.solve_success) ? truth : truth + 1;
    } else {
      answer = task.fallback_wrong_answer;
    }
  } else {
    answer = world.answer_min + (s.guess_offset ? *s.guess_offset : 0);
  }

  std::string out = "<think>\n";
  out += think;
  out += s.fmt_ok ? "\n</think>\n" : "\n";
  out += "\\boxed{" + std::to_string(answer) + "}";
  return out;
}

}  // namespace

SimPolicy SimPolicy::zeros(PolicyDims dims) {
  SimPolicy p;
  p.dims = dims;
  p.trans_logits.assign(static_cast<std::size_t>(dims.vocab_size) * dims.vocab_size, 0.0);
  p.solve_logits.assign(dims.language_count, 0.0);
  p.style_logits.assign(static_cast<std::size_t>(dims.language_count) * 3, 0.0);
  return p;
}

std::vector<double> SimPolicy::flatten() const {
  std::vector<double> out;
  out.reserve(dims.param_count());
  out.insert(out.end(), trans_logits.begin(), trans_logits.end());
  out.insert(out.end(), solve_logits.begin(), solve_logits.end());
  out.insert(out.end(), style_logits.begin(), style_logits.end());
  return out;
}

SimPolicy SimPolicy::unflatten(PolicyDims dims, std::span<const double> params) {
  if (static_cast<int>(params.size()) != dims.param_count()) {
    throw std::invalid_argument("SimPolicy::unflatten: size mismatch");
  }
  SimPolicy p;
  p.dims = dims;
  const std::size_t t = static_cast<std::size_t>(dims.vocab_size) * dims.vocab_size;
  p.trans_logits.assign(params.begin(), params.begin() + t);
  p.solve_logits.assign(params.begin() + t, params.begin() + t + dims.language_count);
  p.style_logits.assign(params.begin() + t + dims.language_count, params.end());
  return p;
}

std::vector<double> DecisionTrace::sampled_logps() const {
  std::vector<double> out;
  out.reserve(decisions.size());
  for (const auto& d : decisions) out.push_back(d.sampled_logp);
  return out;
}

std::pair<std::string, DecisionTrace> sample_translation(const synth::World& world,
                                                         const synth::SynthQuestion& q,
                                                         int tgt_lang,
                                                         const SimPolicy& params, Rng& rng) {
  const auto& src = world.source_language();
  const auto& tgt = world.languages[tgt_lang];

  DecisionTrace trace;
  trace.kind = DecisionTrace::Kind::translation;
  trace.translation_lang = tgt_lang;
  trace.question_id = q.id;

  std::string body;
  for (std::size_t i = 0; i < q.source_tokens.size(); ++i) {
    const int src_id = src.token_index(q.source_tokens[i]);
    if (src_id < 0) throw std::invalid_argument("sample_translation: token not in source alphabet");
    const auto row = trans_row(params, src_id);
    const int chosen = static_cast<int>(rng.categorical_from_logits(row));

    Decision d;
    d.kind = DecisionKind::trans_token;
    d.index = src_id;
    d.chosen = chosen;
    d.domain = params.dims.vocab_size;
    d.sampled_logp = log_softmax_at(row, chosen);
    trace.decisions.push_back(d);

    if (i) body += ' ';
    body += tgt.alphabet[chosen];
  }
  trace.rendered_text = "<Translation>" + body + "</Translation>";
  return {trace.rendered_text, trace};
}

std::pair<std::string, DecisionTrace> sample_response(const synth::World& world,
                                                      const ResponseTask& task,
                                                      const SimPolicy& params, Rng& rng) {
  DecisionTrace trace;
  trace.kind = DecisionTrace::Kind::response;
  trace.task = task;

  auto draw_style = [&](DecisionKind kind, StyleAspect aspect) {
    const double z = params.style_at(task.think_lang, aspect);
    const int chosen = rng.bernoulli(sigmoid(z)) ? 1 : 0;
    trace.decisions.push_back(make_bernoulli(kind, task.think_lang, chosen, z));
    return chosen == 1;
  };

  ResponseShape s;
  s.fmt_ok = draw_style(DecisionKind::style_format, StyleAspect::format);
  s.lang_ok = draw_style(DecisionKind::style_language, StyleAspect::language);
  s.rep_ok = draw_style(DecisionKind::style_repetition, StyleAspect::repetition);

  const double solve_z = params.solve_logits[task.question_lang];
  s.solved = rng.bernoulli(sigmoid(solve_z));
  trace.decisions.push_back(
      make_bernoulli(DecisionKind::solve_choice, task.question_lang, s.solved ? 1 : 0, solve_z));

  if (s.solved) {
    const auto decoded = synth::decode_question(
        textcheck::tokenize(task.question_text).tokens, world.languages[task.question_lang]);
    if (decoded) {
      const auto [a, op, b] = *decoded;
      const double p = world.solve_success_prob(a, op, b);
      const bool success = rng.bernoulli(p);
      Decision d;
      d.kind = DecisionKind::solve_outcome;
      d.chosen = success ? 1 : 0;
      d.fixed_logp = std::log(std::clamp(success ? p : 1.0 - p, 1e-300, 1.0));
      d.sampled_logp = d.fixed_logp;
      trace.decisions.push_back(d);
      s.solve_success = success;
    }
  } else {
    const long long range = world.answer_max - world.answer_min + 1;
    const int offset = static_cast<int>(rng.uniform_int(0, range - 1));
    Decision d;
    d.kind = DecisionKind::guess_pick;
    d.chosen = offset;
    d.domain = static_cast<int>(range);
    d.fixed_logp = -std::log(static_cast<double>(range));
    d.sampled_logp = d.fixed_logp;
    trace.decisions.push_back(d);
    s.guess_offset = offset;
  }

  trace.rendered_text = render_response(world, task, s);
  return {trace.rendered_text, trace};
}

std::string render_trace(const synth::World& world, const DecisionTrace& trace) {
  if (trace.kind == DecisionTrace::Kind::translation) {
    const auto& tgt = world.languages[trace.translation_lang];
    std::string body;
    for (std::size_t i = 0; i < trace.decisions.size(); ++i) {
      if (i) body += ' ';
      body += tgt.alphabet[trace.decisions[i].chosen];
    }
    return "<Translation>" + body + "</Translation>";
  }
  return render_response(world, trace.task, shape_from_decisions(trace.decisions));
}

double decision_logp(const Decision& d, const SimPolicy& params) {
  switch (d.kind) {
    case DecisionKind::trans_token: {
      if (d.index < 0 || d.index >= params.dims.vocab_size || d.chosen < 0 ||
          d.chosen >= params.dims.vocab_size) {
        throw std::invalid_argument("decision_logp: trans index out of range");
      }
      return log_softmax_at(trans_row(params, d.index), d.chosen);
    }
    case DecisionKind::style_format:
    case DecisionKind::style_language:
    case DecisionKind::style_repetition: {
      if (d.index < 0 || d.index >= params.dims.language_count) {
        throw std::invalid_argument("decision_logp: language index out of range");
      }
      const auto aspect = static_cast<StyleAspect>(static_cast<int>(d.kind) -
                                                   static_cast<int>(DecisionKind::style_format));
      const double z = params.style_at(d.index, aspect);
      return d.chosen ? log_sigmoid(z) : log_sigmoid(-z);
    }
    case DecisionKind::solve_choice: {
      if (d.index < 0 || d.index >= params.dims.language_count) {
        throw std::invalid_argument("decision_logp: language index out of range");
      }
      const double z = params.solve_logits[d.index];
      return d.chosen ? log_sigmoid(z) : log_sigmoid(-z);
    }
    case DecisionKind::guess_pick:
    case DecisionKind::solve_outcome:
      return d.fixed_logp;
  }
  throw std::invalid_argument("decision_logp: unknown decision kind");
}

double logprob_of(const DecisionTrace& trace, const SimPolicy& params,
                  std::vector<double>* per_decision) {
  if (per_decision) {
    per_decision->clear();
    per_decision->reserve(trace.decisions.size());
  }
  double total = 0.0;
  for (const auto& d : trace.decisions) {
    const double lp = decision_logp(d, params);
    total += lp;
    if (per_decision) per_decision->push_back(lp);
  }
  return total;
}

void accumulate_decision_gradient(const Decision& d, const SimPolicy& params, double coeff,
                                  std::span<double> grad) {
  const PolicyDims& dims = params.dims;
  if (static_cast<int>(grad.size()) != dims.param_count()) {
    throw std::invalid_argument("accumulate_decision_gradient: grad size mismatch");
  }
  switch (d.kind) {
    case DecisionKind::trans_token: {
      const auto row = trans_row(params, d.index);
      double mx = row[0];
      for (double v : row) mx = std::max(mx, v);
      double sum = 0.0;
      for (double v : row) sum += std::exp(v - mx);
      const std::size_t base = static_cast<std::size_t>(d.index) * dims.vocab_size;
      for (int j = 0; j < dims.vocab_size; ++j) {
        const double pj = std::exp(row[j] - mx) / sum;
        grad[base + j] += coeff * ((j == d.chosen ? 1.0 : 0.0) - pj);
      }
      return;
    }
    case DecisionKind::style_format:
    case DecisionKind::style_language:
    case DecisionKind::style_repetition: {
      const int aspect = static_cast<int>(d.kind) - static_cast<int>(DecisionKind::style_format);
      const double z = params.style_at(d.index, static_cast<StyleAspect>(aspect));
      grad[dims.style_offset() + d.index * 3 + aspect] += coeff * (d.chosen - sigmoid(z));
      return;
    }
    case DecisionKind::solve_choice: {
      const double z = params.solve_logits[d.index];
      grad[dims.solve_offset() + d.index] += coeff * (d.chosen - sigmoid(z));
      return;
    }
    case DecisionKind::guess_pick:
    case DecisionKind::solve_outcome:
      return;  // parameterless
  }
}

std::vector<double> analytic_param_gradients(const DecisionTrace& trace, const SimPolicy& params) {
  std::vector<double> grad(params.dims.param_count(), 0.0);
  for (const auto& d : trace.decisions) {
    accumulate_decision_gradient(d, params, 1.0, grad);
  }
  return grad;
}

}  // namespace transloop::policy
