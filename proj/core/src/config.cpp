#include "transloop/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace transloop::config {

namespace {

using nlohmann::ordered_json;

void reject_unknown_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                         const char* section) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument(std::string("config: unknown key '") + key + "' in " + section);
    }
  }
}

template <typename T>
void read_field(const ordered_json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void parse_world(const ordered_json& j, synth::WorldConfig& w) {
  reject_unknown_keys(j,
                      {"vocab_size", "question_count", "value_min", "value_max", "languages",
                       "op_solve_probs", "hard_question_percent", "hard_solve_prob", "repetition"},
                      "world");
  read_field(j, "vocab_size", w.vocab_size);
  read_field(j, "question_count", w.question_count);
  read_field(j, "value_min", w.value_min);
  read_field(j, "value_max", w.value_max);
  read_field(j, "languages", w.language_codes);
  if (j.contains("op_solve_probs")) {
    const auto& ops = j.at("op_solve_probs");
    reject_unknown_keys(ops, {"add", "sub", "mul"}, "world.op_solve_probs");
    read_field(ops, "add", w.op_solve_probs[0]);
    read_field(ops, "sub", w.op_solve_probs[1]);
    read_field(ops, "mul", w.op_solve_probs[2]);
  }
  read_field(j, "hard_question_percent", w.hard_question_percent);
  read_field(j, "hard_solve_prob", w.hard_solve_prob);
  if (j.contains("repetition")) {
    const auto& rep = j.at("repetition");
    reject_unknown_keys(
        rep, {"ngram_n", "ngram_count_threshold", "line_min_tokens", "line_count_threshold"},
        "world.repetition");
    read_field(rep, "ngram_n", w.repetition.ngram_n);
    read_field(rep, "ngram_count_threshold", w.repetition.ngram_count_threshold);
    read_field(rep, "line_min_tokens", w.repetition.line_min_tokens);
    read_field(rep, "line_count_threshold", w.repetition.line_count_threshold);
  }
}

void parse_pipeline(const ordered_json& j, pipeline::PipelineConfig& p) {
  reject_unknown_keys(j,
                      {"theta", "group_size", "translation_candidates", "iterations",
                       "init_style_logit", "init_solve_logit_source", "init_solve_logit_target",
                       "eval_samples_per_question"},
                      "pipeline");
  read_field(j, "theta", p.theta);
  read_field(j, "group_size", p.group_size);
  read_field(j, "translation_candidates", p.translation_candidates);
  read_field(j, "iterations", p.iterations);
  read_field(j, "init_style_logit", p.init_style_logit);
  read_field(j, "init_solve_logit_source", p.init_solve_logit_source);
  read_field(j, "init_solve_logit_target", p.init_solve_logit_target);
  read_field(j, "eval_samples_per_question", p.eval_samples_per_question);
}

void parse_grpo(const ordered_json& j, pipeline::PipelineConfig& p) {
  reject_unknown_keys(j,
                      {"clip_epsilon", "kl_beta", "std_epsilon", "learning_rate", "optimizer",
                       "adam_beta1", "adam_beta2", "adam_epsilon"},
                      "grpo");
  read_field(j, "clip_epsilon", p.grpo.clip_epsilon);
  read_field(j, "kl_beta", p.grpo.kl_beta);
  read_field(j, "std_epsilon", p.grpo.std_epsilon);
  read_field(j, "learning_rate", p.optimizer.learning_rate);
  read_field(j, "optimizer", p.optimizer.kind);
  read_field(j, "adam_beta1", p.optimizer.adam_beta1);
  read_field(j, "adam_beta2", p.optimizer.adam_beta2);
  read_field(j, "adam_epsilon", p.optimizer.adam_epsilon);
}

void parse_io(const ordered_json& j, IoConfig& io) {
  reject_unknown_keys(j, {"output_dir", "log_rollouts", "checkpoint_every", "verbosity"}, "io");
  read_field(j, "output_dir", io.output_dir);
  read_field(j, "log_rollouts", io.log_rollouts);
  read_field(j, "checkpoint_every", io.checkpoint_every);
  read_field(j, "verbosity", io.verbosity);
}

}  // namespace

void RunConfig::validate() const {
  world.validate();
  pipeline.validate();
  if (io.checkpoint_every < 0) throw std::invalid_argument("io: checkpoint_every must be >= 0");
}

RunConfig parse_run_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  reject_unknown_keys(j, {"seed", "world", "pipeline", "grpo", "io"}, "top level");

  RunConfig cfg;
  read_field(j, "seed", cfg.seed);
  if (j.contains("world")) parse_world(j.at("world"), cfg.world);
  if (j.contains("pipeline")) parse_pipeline(j.at("pipeline"), cfg.pipeline);
  if (j.contains("grpo")) parse_grpo(j.at("grpo"), cfg.pipeline);
  if (j.contains("io")) parse_io(j.at("io"), cfg.io);
  cfg.pipeline.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string world_to_json(const synth::World& world) {
  ordered_json j;
  j["vocab_size"] = world.cfg.vocab_size;
  j["question_count"] = world.cfg.question_count;
  j["value_min"] = world.cfg.value_min;
  j["value_max"] = world.cfg.value_max;
  j["answer_min"] = world.answer_min;
  j["answer_max"] = world.answer_max;
  j["op_solve_probs"] = {{"add", world.cfg.op_solve_probs[0]},
                         {"sub", world.cfg.op_solve_probs[1]},
                         {"mul", world.cfg.op_solve_probs[2]}};
  j["hard_question_percent"] = world.cfg.hard_question_percent;
  j["hard_solve_prob"] = world.cfg.hard_solve_prob;
  j["languages"] = ordered_json::array();
  for (const auto& lang : world.languages) {
    j["languages"].push_back({{"code", lang.code}, {"alphabet", lang.alphabet}});
  }
  j["questions"] = ordered_json::array();
  for (const auto& q : world.questions) {
    j["questions"].push_back({{"id", q.id},
                              {"a", q.a},
                              {"op", std::string(synth::op_name(q.op))},
                              {"b", q.b},
                              {"answer", q.gold_answer},
                              {"source_tokens", q.source_tokens}});
  }
  return j.dump(2) + "\n";
}

std::string policy_to_json(const policy::SimPolicy& pol) {
  ordered_json j;
  j["vocab_size"] = pol.dims.vocab_size;
  j["language_count"] = pol.dims.language_count;
  j["trans_logits"] = pol.trans_logits;
  j["solve_logits"] = pol.solve_logits;
  j["style_logits"] = pol.style_logits;
  return j.dump(2) + "\n";
}

policy::SimPolicy policy_from_json(const std::string& json_text) {
  const ordered_json j = ordered_json::parse(json_text);
  policy::PolicyDims dims{j.at("vocab_size").get<int>(), j.at("language_count").get<int>()};
  policy::SimPolicy pol;
  pol.dims = dims;
  pol.trans_logits = j.at("trans_logits").get<std::vector<double>>();
  pol.solve_logits = j.at("solve_logits").get<std::vector<double>>();
  pol.style_logits = j.at("style_logits").get<std::vector<double>>();
  if (static_cast<int>(pol.trans_logits.size()) != dims.vocab_size * dims.vocab_size ||
      static_cast<int>(pol.solve_logits.size()) != dims.language_count ||
      static_cast<int>(pol.style_logits.size()) != dims.language_count * 3) {
    throw std::invalid_argument("policy_from_json: array sizes do not match dimensions");
  }
  return pol;
}

}  // namespace transloop::config
