#pragma once

#include <vector>

#include "diffdepth/metrics.hpp"
#include "diffdepth/sampler.hpp"
#include "diffdepth/synthdata.hpp"

namespace diffdepth {

// Run ensemble inference over an evaluation set and score each prediction
// against its ground truth. Per-image seeds are derived from
// settings.seed, so the whole evaluation is reproducible.
std::vector<MetricReport> evaluate_model(const UNetParams<float>& model,
                                         const NoiseSchedule& sched,
                                         const std::vector<Sample>& eval_set,
                                         int64_t latent_factor, const InferSettings& settings);

}  // namespace diffdepth
