#pragma once

#include <string>
#include <vector>

#include "diffdepth/config.hpp"

namespace ddtool {

// Train/evaluate grids of toggle configurations on shared data and seeds.
// Writes one CSV per suite plus a plain-text summary; returns 0 on success.
int run_ablation_suite(const std::string& suite, const std::vector<uint64_t>& seeds,
                       const diffdepth::RunConfig& base, const std::string& out_dir);

}  // namespace ddtool
