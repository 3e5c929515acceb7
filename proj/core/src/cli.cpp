#include "transloop/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "transloop/config.hpp"
#include "transloop/gradcheck.hpp"
#include "transloop/metrics.hpp"
#include "transloop/pipeline.hpp"

namespace transloop::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int workers = 0;  // 0 = auto
};

config::RunConfig resolve_config(const GlobalOpts& g) {
  config::RunConfig cfg;
  if (!g.config_path.empty()) {
    cfg = config::load_run_config(g.config_path);
  } else {
    cfg.validate();
  }
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.pipeline.seed = *g.seed;
  }
  if (g.out_dir) cfg.io.output_dir = *g.out_dir;
  if (g.workers > 0) {
    cfg.pipeline.workers = g.workers;
  } else {
    const unsigned hw = std::thread::hardware_concurrency();
    cfg.pipeline.workers = hw > 0 ? static_cast<int>(hw) : 1;
  }
  return cfg;
}

fs::path ensure_out_dir(const config::RunConfig& cfg) {
  const fs::path dir(cfg.io.output_dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<double> parse_value_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list of numbers");
  return out;
}

class JsonlRolloutSink : public pipeline::RolloutSink {
 public:
  explicit JsonlRolloutSink(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }

  void write(const pipeline::RolloutLogEntry& e) override {
    ordered_json j;
    j["iter"] = e.iteration;
    j["phase"] = e.phase;
    j["question_id"] = e.question_id;
    if (e.candidate_index >= 0) j["candidate"] = e.candidate_index;
    j["kind"] = e.kind;
    j["text"] = *e.text;
    if (e.breakdown) {
      j["rewards"] = {{"r_acc", e.breakdown->r_acc},
                      {"r_lang", e.breakdown->r_lang},
                      {"r_rep", e.breakdown->r_rep},
                      {"r_fmt", e.breakdown->r_fmt},
                      {"r_final", e.reward}};
    } else {
      j["rewards"] = {{"r_trans", static_cast<int>(e.reward)}};
    }
    j["logprobs"] = *e.logprobs;
    out_ << j.dump() << '\n';
  }

 private:
  std::ofstream out_;
};

int cmd_gen_world(const GlobalOpts& g) {
  const config::RunConfig cfg = resolve_config(g);
  const synth::World world = synth::World::build(cfg.world, cfg.seed);
  const fs::path dir = ensure_out_dir(cfg);
  write_file(dir / "world.json", config::world_to_json(world));
  std::cout << (dir / "world.json").string() << "\n";
  return 0;
}

int cmd_run(const GlobalOpts& g) {
  const config::RunConfig cfg = resolve_config(g);
  const synth::World world = synth::World::build(cfg.world, cfg.seed);
  const fs::path dir = ensure_out_dir(cfg);

  std::unique_ptr<JsonlRolloutSink> sink;
  if (cfg.io.log_rollouts) sink = std::make_unique<JsonlRolloutSink>(dir / "rollouts.jsonl");

  pipeline::IterationObserver checkpoints;
  if (cfg.io.checkpoint_every > 0) {
    checkpoints = [&](int iter, const policy::SimPolicy& pol) {
      if (iter % cfg.io.checkpoint_every == 0) {
        write_file(dir / ("checkpoint_" + std::to_string(iter) + ".json"),
                   config::policy_to_json(pol));
      }
    };
  }

  const pipeline::RunResult result =
      pipeline::run_training(world, cfg.pipeline, sink.get(), checkpoints);

  write_file(dir / "world.json", config::world_to_json(world));
  write_file(dir / "metrics.csv", pipeline::metrics_csv(result.history));
  const int final_iter = cfg.pipeline.iterations;
  write_file(dir / ("checkpoint_" + std::to_string(final_iter) + ".json"),
             config::policy_to_json(result.final_policy));

  if (cfg.io.verbosity > 0) {
    const auto& last = result.history.back();
    std::cout << "iterations=" << cfg.pipeline.iterations
              << " exact_match=" << format_double(last.translation_exact_match)
              << " lc_and_acc=" << format_double(last.eval_lc_and_acc) << "\n";
  }
  return 0;
}

int cmd_sweep_theta(const GlobalOpts& g, const std::string& values_csv) {
  const config::RunConfig base = resolve_config(g);
  const std::vector<double> thetas = parse_value_list(values_csv);
  const synth::World world = synth::World::build(base.world, base.seed);
  const fs::path dir = ensure_out_dir(base);

  std::string csv = "theta,lc,acc,lc_and_acc\n";
  for (double theta : thetas) {
    pipeline::PipelineConfig pcfg = base.pipeline;
    pcfg.theta = theta;
    const pipeline::RunResult result = pipeline::run_training(world, pcfg, nullptr);
    const auto& last = result.history.back();
    csv += format_double(theta);
    csv += ',';
    csv += format_double(last.eval_lc);
    csv += ',';
    csv += format_double(last.eval_acc);
    csv += ',';
    csv += format_double(last.eval_lc_and_acc);
    csv += '\n';
    if (base.io.verbosity > 0) {
      std::cerr << "theta=" << format_double(theta)
                << " lc_and_acc=" << format_double(last.eval_lc_and_acc) << "\n";
    }
  }
  write_file(dir / "sweep_theta.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_noise_analysis(const GlobalOpts& g, int questions, int group_size, int candidates,
                       double faithful_prob, double fixed_q, const std::string& thetas_csv) {
  const config::RunConfig base = resolve_config(g);
  metrics::NoiseSimConfig sim;
  sim.question_count = questions;
  sim.group_size = group_size;
  sim.candidates_per_question = candidates;
  sim.faithful_prob = faithful_prob;
  if (fixed_q >= 0.0) sim.fixed_q = fixed_q;
  sim.seed = base.seed;

  const std::vector<double> thetas = parse_value_list(thetas_csv);
  const auto rows = metrics::simulate_filter_noise(sim, thetas);

  std::string csv = "theta,retained,faithful_total,false_negatives,rate\n";
  for (const auto& r : rows) {
    csv += format_double(r.theta);
    csv += ',';
    csv += std::to_string(r.retained);
    csv += ',';
    csv += std::to_string(r.faithful_total);
    csv += ',';
    csv += std::to_string(r.false_negatives);
    csv += ',';
    csv += format_double(r.rate);
    csv += '\n';
  }
  const fs::path dir = ensure_out_dir(base);
  write_file(dir / "noise_analysis.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_check_rewards(const GlobalOpts& g, const std::string& input_path) {
  const config::RunConfig cfg = resolve_config(g);
  const synth::World world = synth::World::build(cfg.world, cfg.seed);
  const auto profiles = synth::make_language_profiles(world);

  std::ifstream in(input_path);
  if (!in) throw std::runtime_error("cannot open " + input_path);

  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ordered_json j = ordered_json::parse(line);
    reward::ScoringContext ctx;
    ctx.target_language = j.at("target_language").get<std::string>();
    ctx.gold_answer = j.at("gold_answer").get<std::string>();
    ctx.repetition_cfg = world.cfg.repetition;
    ctx.language_profiles = profiles;
    const std::string response = j.at("response").get<std::string>();

    const reward::RewardBreakdown b = reward::score_response(response, ctx);
    const reward::FinalReward f = reward::compose_final(b);
    ordered_json o;
    o["id"] = j.at("id");
    o["r_acc"] = b.r_acc;
    o["r_lang"] = b.r_lang;
    o["r_rep"] = b.r_rep;
    o["r_fmt"] = b.r_fmt;
    o["r_final"] = f.value;
    out << o.dump() << '\n';
  }

  if (g.out_dir) {
    const fs::path dir = ensure_out_dir(cfg);
    write_file(dir / "check_rewards.jsonl", out.str());
  } else {
    std::cout << out.str();
  }
  return 0;
}

int cmd_gradcheck(const GlobalOpts& g, int instances) {
  const config::RunConfig cfg = resolve_config(g);
  const auto report = gradcheck::run_gradient_check_suite(instances, cfg.seed);
  for (const auto& inst : report.instances) {
    std::cout << "instance " << inst.index << ": params=" << inst.param_count
              << " max_rel_err=" << format_double(inst.max_rel_error)
              << (inst.has_active_clipping ? " [clipping]" : "") << "\n";
  }
  std::cout << (report.passed ? "PASS" : "FAIL") << " max_rel_err="
            << format_double(report.max_rel_error)
            << " clipped_instances=" << report.clipped_instances << "\n";
  return report.passed ? 0 : 1;
}

int cmd_mexa(const GlobalOpts& g, const std::string& input_path) {
  std::ifstream in(input_path);
  if (!in) throw std::runtime_error("cannot open " + input_path);
  ordered_json j;
  in >> j;

  const int layer_count = j.at("layer_count").get<int>();
  std::vector<std::vector<metrics::EmbeddingPair>> layers(layer_count);
  for (const auto& pair : j.at("pairs")) {
    if (static_cast<int>(pair.size()) != layer_count) {
      throw std::invalid_argument("mexa: pair does not cover layer_count layers");
    }
    for (int l = 0; l < layer_count; ++l) {
      layers[l].emplace_back(pair[l][0].get<std::vector<double>>(),
                             pair[l][1].get<std::vector<double>>());
    }
  }
  const auto results = metrics::mexa_alignment(layers);
  std::string csv = "layer,mean_cosine,pairs,errors\n";
  for (std::size_t l = 0; l < results.size(); ++l) {
    csv += std::to_string(l);
    csv += ',';
    csv += format_double(results[l].mean_cosine);
    csv += ',';
    csv += std::to_string(results[l].pair_count);
    csv += ',';
    csv += std::to_string(results[l].error_pairs.size());
    csv += '\n';
  }
  if (g.out_dir) {
    config::RunConfig cfg = resolve_config(g);
    const fs::path dir = ensure_out_dir(cfg);
    write_file(dir / "mexa.csv", csv);
  } else {
    std::cout << csv;
  }
  return 0;
}

}  // namespace

int run_main(int argc, const char* const* argv) {
  CLI::App app{"Closed-loop translation/reasoning RL sandbox"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Run configuration (JSON)");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed");
  std::string out_value;
  auto* out_opt = app.add_option("--out", out_value, "Override the output directory");
  app.add_option("--workers", g.workers, "Worker threads (default: available parallelism)");

  auto* run = app.add_subcommand("run", "Train on the configured world and write metrics");
  auto* sweep = app.add_subcommand("sweep-theta", "Run once per filter threshold");
  std::string sweep_values = "0,0.16667,0.33333,0.5,0.66667";
  sweep->add_option("--values", sweep_values, "Comma-separated theta values");

  auto* noise = app.add_subcommand("noise-analysis", "Simulated deferred-reward noise sweep");
  int nq = 2000, ng = 6, nk = 4;
  double faithful_prob = 0.7, fixed_q = -1.0;
  std::string noise_thetas = "0,0.16667,0.33333,0.5,0.66667";
  noise->add_option("--questions", nq, "Simulated question count");
  noise->add_option("--group-size", ng, "Rollouts per question");
  noise->add_option("--candidates", nk, "Translation candidates per question");
  noise->add_option("--faithful-prob", faithful_prob, "Probability a candidate is faithful");
  noise->add_option("--fixed-q", fixed_q, "Fix the per-question competence (default: uniform)");
  noise->add_option("--thetas", noise_thetas, "Comma-separated filter thresholds");

  auto* check = app.add_subcommand("check-rewards", "Score JSONL response records");
  std::string check_input;
  check->add_option("--input", check_input, "JSONL input file")->required();

  auto* gradcheck_cmd = app.add_subcommand("grpo-gradcheck", "Finite-difference gradient check");
  int instances = 20;
  gradcheck_cmd->add_option("--instances", instances, "Number of seeded instances");

  auto* gen = app.add_subcommand("gen-world", "Write the world definition as JSON");

  auto* mexa = app.add_subcommand("mexa", "Layer-wise mean cosine over paired embeddings");
  std::string mexa_input;
  mexa->add_option("--input", mexa_input, "JSON embedding pairs")->required();

  try {
    app.parse(argc, argv);
    if (*seed_opt) g.seed = seed_value;
    if (*out_opt) g.out_dir = out_value;

    if (*run) return cmd_run(g);
    if (*sweep) return cmd_sweep_theta(g, sweep_values);
    if (*noise) return cmd_noise_analysis(g, nq, ng, nk, faithful_prob, fixed_q, noise_thetas);
    if (*check) return cmd_check_rewards(g, check_input);
    if (*gradcheck_cmd) return cmd_gradcheck(g, instances);
    if (*gen) return cmd_gen_world(g);
    if (*mexa) return cmd_mexa(g, mexa_input);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("transloop");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace transloop::cli
