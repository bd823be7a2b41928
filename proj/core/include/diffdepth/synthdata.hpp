#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffdepth/depth.hpp"
#include "diffdepth/tensor.hpp"

namespace diffdepth {

// Procedural scene description. Depths of the primitives are drawn from a
// power law with density ~ d^(-tail_exponent) over [d_min, d_max], so
// exponents > 1 concentrate pixels in the near range over a far background
// plane — a controllable long-tail distribution.
struct SceneSpec {
    int64_t width = 64, height = 64;
    int64_t min_primitives = 8, max_primitives = 16;
    double d_min = 1.0, d_max = 20.0;
    double tail_exponent = 2.0;
    double texture_scale = 0.05;
    uint64_t seed = 0;

    void validate() const;
};

// Paired image/depth sample. Image channels: shaded intensity (inverse
// depth), depth-gradient magnitude, seeded texture noise — all in [0,1]
// and a deterministic function of (depth field, seed).
struct Sample {
    Tensor<float> image;  // [3,H,W]
    DepthMap depth;       // meters, all valid
    uint64_t seed = 0;
};

std::vector<Sample> generate(const SceneSpec& spec, int64_t n);

// Inverse-CDF power-law draw over [d_min, d_max], density ~ d^-a.
double sample_power_law(double u, double d_min, double d_max, double a);

// File layout: <stem>_depth.pfm (1-channel, meters) and <stem>_image.pfm
// (3-channel). The dataset manifest has one tab-separated line per sample:
// depth-path <TAB> image-path <TAB> seed.
void write_sample(const Sample& s, const std::string& dir, const std::string& stem);
Sample read_sample(const std::string& depth_path, const std::string& image_path, uint64_t seed);

struct ManifestEntry {
    std::string depth_path, image_path;
    uint64_t seed = 0;
};
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace diffdepth
