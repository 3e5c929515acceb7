#pragma once

#include <cstdint>
#include <vector>

#include "transloop/grpo.hpp"

namespace transloop::gradcheck {

struct InstanceReport {
  int index = 0;
  int param_count = 0;
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
  bool has_active_clipping = false;  // some token sits on a saturated clip branch
};

struct SuiteReport {
  std::vector<InstanceReport> instances;
  double max_rel_error = 0.0;
  int clipped_instances = 0;
  bool passed = false;
};

// Seeded end-to-end check of the analytic GRPO gradient against central
// finite differences on randomly built rollout batches (translation and
// response traces, stale old/ref policies, nonzero KL weight). The first
// few instances shift logp_old hard enough that at least one token provably
// saturates the clip.
SuiteReport run_gradient_check_suite(int instances, std::uint64_t seed, double h = 1e-5,
                                     double tolerance = 1e-4);

}  // namespace transloop::gradcheck
