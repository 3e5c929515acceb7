#pragma once

#include <cstdint>
#include <string>

#include "transloop/pipeline.hpp"
#include "transloop/synthworld.hpp"

namespace transloop::config {

struct IoConfig {
  std::string output_dir = "out";
  bool log_rollouts = true;
  int checkpoint_every = 0;  // 0 = final checkpoint only
  int verbosity = 1;
};

// One JSON document drives a run: world, pipeline, grpo (including the
// optimizer), io, seed. Unknown keys are rejected so typos fail loudly.
struct RunConfig {
  std::uint64_t seed = 1;
  synth::WorldConfig world;
  pipeline::PipelineConfig pipeline;
  IoConfig io;

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);  // throws on missing file

std::string world_to_json(const synth::World& world);
std::string policy_to_json(const policy::SimPolicy& pol);
policy::SimPolicy policy_from_json(const std::string& json_text);

}  // namespace transloop::config
