#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffdepth/biasmap.hpp"
#include "diffdepth/lfm.hpp"
#include "diffdepth/schedule.hpp"
#include "diffdepth/synthdata.hpp"
#include "diffdepth/unet.hpp"

namespace diffdepth {

// Whole-run configuration: scene generation, codec, schedule, model,
// training and inference knobs. Serialized as `key = value` lines with a
// strict key whitelist; every command writes its fully resolved config
// next to its outputs so any run can be reproduced from that file alone.
struct RunConfig {
    uint64_t seed = 0;

    // scene generation
    int64_t image_size = 64;
    int64_t data_count = 256;
    double d_min = 1.0, d_max = 20.0;
    double tail_exponent = 2.0;
    int64_t min_primitives = 8, max_primitives = 16;
    double texture_scale = 0.05;

    // latent codec
    int64_t latent_factor = 4;

    // diffusion schedule
    int64_t diffusion_steps = 200;
    double beta_start = 0.00085, beta_end = 0.06;
    std::string schedule_kind = "scaled-linear";

    // model
    int64_t base_channels = 32;
    int64_t time_embed_dim = 64;
    int64_t heads = 4;
    std::string lfm_placement = "decoder-penultimate";
    std::string router_variant = "le-sa-pm";
    int64_t n_masks = 4;

    // training
    int64_t steps = 4000;
    int64_t batch_size = 8;
    double lr = 3e-5;
    double adam_beta1 = 0.9, adam_beta2 = 0.999;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    double lambda_var = 1.0;
    double gamma = 5.0;
    bool lfm_on = true;
    bool biasmap_on = true;
    bool w_dist_on = true;
    bool w_struct_on = true;
    bool var_loss_on = true;
    std::string pool_dist = "avg";
    std::string pool_struct = "max";
    int64_t checkpoint_every = 0;  // 0: final only

    // inference
    int64_t ddim_steps = 20;
    int64_t ensemble_runs = 4;

    SceneSpec scene() const;
    NoiseSchedule schedule() const;
    UNetConfig unet() const;  // honors lfm_on
    PoolMode dist_pool() const { return pool_mode_from_string(pool_dist); }
    PoolMode struct_pool() const { return pool_mode_from_string(pool_struct); }

    void set(const std::string& key, const std::string& value);
    std::string serialize() const;
    void validate() const;
};

// Parse `key = value` text (# comments, blank lines allowed). Unknown keys
// are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const RunConfig& cfg);

}  // namespace diffdepth
