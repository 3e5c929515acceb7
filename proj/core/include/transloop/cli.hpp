#pragma once

#include <string>
#include <vector>

namespace transloop::cli {

// Subcommand dispatch: run, sweep-theta, noise-analysis, check-rewards,
// grpo-gradcheck, gen-world, mexa. Returns a process exit code; all
// diagnostics go to stderr.
int run_main(int argc, const char* const* argv);
int run_main(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace transloop::cli
