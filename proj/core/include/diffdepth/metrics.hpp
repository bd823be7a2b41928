#pragma once

#include <array>
#include <string>
#include <vector>

#include "diffdepth/depth.hpp"

namespace diffdepth {

// Least-squares scale/shift alignment of a prediction onto ground truth
// over their shared valid pixels; outputs are clamped to >= 1e-6 m.
struct AlignResult {
    double scale = 1.0, shift = 0.0;
    DepthMap aligned;
};
AlignResult align(const DepthMap& pred, const DepthMap& gt);

// mean over valid pixels of |pred - gt| / gt (inputs already aligned).
double absrel(const DepthMap& pred_aligned, const DepthMap& gt);

// fraction of valid pixels with max(pred/gt, gt/pred) < 1.25 (strict).
double delta1(const DepthMap& pred_aligned, const DepthMap& gt);

// Depth bands by fractional position of gt inside its own [d2, d98]:
// boundaries at 0.2 / 0.4 / 0.6 of the percentile range.
inline constexpr int kNumBands = 4;
inline const char* band_name(int b) {
    static const char* names[kNumBands] = {"0-20%", "20-40%", "40-60%", ">60%"};
    return names[b];
}

struct BandStats {
    bool present = false;
    int64_t pixels = 0;
    double delta1 = 0.0;
};

struct MetricReport {
    double absrel = 0.0;
    double delta1 = 0.0;
    std::array<BandStats, kNumBands> bands;
    int64_t valid_pixels = 0;
};

// Per-band delta1 for one aligned prediction.
std::array<BandStats, kNumBands> range_breakdown(const DepthMap& pred_aligned, const DepthMap& gt);

// Align + all metrics for one image.
MetricReport evaluate_image(const DepthMap& pred, const DepthMap& gt);

// AbsRel / delta1 averaged per image; band delta1 pooled across images
// weighted by band pixel count.
MetricReport aggregate_reports(const std::vector<MetricReport>& reports);

// One row per image plus an "aggregate" row. Columns:
// name,absrel,delta1,valid_pixels,band1_delta1,band1_pixels,...
void write_metrics_csv(const std::string& path, const std::vector<std::string>& names,
                       const std::vector<MetricReport>& reports);

}  // namespace diffdepth
