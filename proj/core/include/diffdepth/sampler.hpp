#pragma once

#include "diffdepth/depth.hpp"
#include "diffdepth/schedule.hpp"
#include "diffdepth/unet.hpp"

namespace diffdepth {

struct InferSettings {
    int64_t ddim_steps = 20;
    int64_t runs = 4;
    uint64_t seed = 0;
};

// Parameter view with gradient tracking disabled (cheap forward passes).
UNetParams<float> inference_view(const UNetParams<float>& model);

// One deterministic reverse trajectory from seeded Gaussian noise; returns
// the predicted clean depth latent.
Tensor<float> ddim_sample(const UNetParams<float>& model, const NoiseSchedule& sched,
                          const Tensor<float>& z_cond, int64_t steps, const Rng& rng);

// Ensemble inference: average the decoded normalized depth maps of
// `runs` independent trajectories (seeds derived from settings.seed in
// fixed order). Output units are "norm" (dimensionless, roughly [-1,1]).
DepthMap ensemble_infer(const UNetParams<float>& model, const NoiseSchedule& sched,
                        const Tensor<float>& z_cond, int64_t latent_factor,
                        const InferSettings& settings);

}  // namespace diffdepth
