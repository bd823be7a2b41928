#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffdepth/tensor.hpp"

namespace diffdepth {

// 2D depth field with validity mask. Values are meters for ground truth
// ("m") or dimensionless for normalized maps ("norm").
struct DepthMap {
    int64_t height = 0, width = 0;
    std::vector<float> values;
    std::vector<uint8_t> valid;
    std::string units = "m";

    DepthMap() = default;
    DepthMap(int64_t h, int64_t w, std::string u = "m")
        : height(h), width(w), values((size_t)(h * w), 0.f), valid((size_t)(h * w), 1), units(std::move(u)) {}

    int64_t pixels() const { return height * width; }
    float& at(int64_t y, int64_t x) { return values[(size_t)(y * width + x)]; }
    float at(int64_t y, int64_t x) const { return values[(size_t)(y * width + x)]; }
    bool is_valid(int64_t i) const { return valid[(size_t)i] != 0; }
};

// 2nd / 98th percentile of the valid depth values (linear interpolation).
struct PercentileStats {
    double d2 = 0.0;
    double d98 = 0.0;
};

// Linear-interpolation percentiles over valid pixels only: the q-quantile
// sits at fractional position q*(n-1) in the sorted valid values.
PercentileStats percentiles(const DepthMap& d);

// Affine percentile normalization: d_norm = 2*((d - d2)/(d98 - d2) - 1/2),
// mapping [d2, d98] onto [-1, 1]; values outside are clamped. Invalid
// pixels stay invalid with value 0.
DepthMap normalize_depth(const DepthMap& d, const PercentileStats& s);

// Exact algebraic inverse of normalize_depth on [-1, 1].
DepthMap denormalize_depth(const DepthMap& dn, const PercentileStats& s);

}  // namespace diffdepth
