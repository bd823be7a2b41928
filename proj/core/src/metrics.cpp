#include "diffdepth/metrics.hpp"

#include <cmath>

#include "diffdepth/errors.hpp"
#include "diffdepth/fsio.hpp"

namespace diffdepth {

namespace {

void check_same_size(const DepthMap& a, const DepthMap& b, const char* what) {
    if (a.height != b.height || a.width != b.width)
        throw ShapeError(std::string(what) + ": size mismatch");
}

}  // namespace

AlignResult align(const DepthMap& pred, const DepthMap& gt) {
    check_same_size(pred, gt, "align");
    double sp = 0, sp2 = 0, sg = 0, spg = 0;
    int64_t n = 0;
    for (int64_t i = 0; i < pred.pixels(); ++i) {
        if (!pred.is_valid(i) || !gt.is_valid(i)) continue;
        double p = pred.values[(size_t)i], g = gt.values[(size_t)i];
        sp += p;
        sp2 += p * p;
        sg += g;
        spg += p * g;
        ++n;
    }
    if (n < 2) throw ValueError("align: fewer than 2 shared valid pixels");
    // normal equations for min ||a*p + b - g||^2
    double det = (double)n * sp2 - sp * sp;
    if (std::abs(det) < 1e-12 * (double)n * (sp2 + 1.0))
        throw ValueError("align: degenerate system (constant prediction)");
    double gvar = 0.0, gmean = sg / (double)n;
    for (int64_t i = 0; i < pred.pixels(); ++i)
        if (pred.is_valid(i) && gt.is_valid(i)) {
            double d = gt.values[(size_t)i] - gmean;
            gvar += d * d;
        }
    if (gvar == 0.0) throw ValueError("align: constant ground truth");
    AlignResult r;
    r.scale = ((double)n * spg - sp * sg) / det;
    r.shift = (sg - r.scale * sp) / (double)n;
    r.aligned = DepthMap(pred.height, pred.width, gt.units);
    for (int64_t i = 0; i < pred.pixels(); ++i) {
        if (!pred.is_valid(i) || !gt.is_valid(i)) {
            r.aligned.valid[(size_t)i] = 0;
            r.aligned.values[(size_t)i] = 0.f;
            continue;
        }
        double v = r.scale * (double)pred.values[(size_t)i] + r.shift;
        r.aligned.values[(size_t)i] = (float)std::max(v, 1e-6);
    }
    return r;
}

double absrel(const DepthMap& pred_aligned, const DepthMap& gt) {
    check_same_size(pred_aligned, gt, "absrel");
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t i = 0; i < gt.pixels(); ++i) {
        if (!pred_aligned.is_valid(i) || !gt.is_valid(i)) continue;
        double p = pred_aligned.values[(size_t)i], g = gt.values[(size_t)i];
        acc += std::abs((p - g) / g);
        ++n;
    }
    if (n == 0) throw ValueError("absrel: empty valid intersection");
    return acc / (double)n;
}

double delta1(const DepthMap& pred_aligned, const DepthMap& gt) {
    check_same_size(pred_aligned, gt, "delta1");
    int64_t hit = 0, n = 0;
    for (int64_t i = 0; i < gt.pixels(); ++i) {
        if (!pred_aligned.is_valid(i) || !gt.is_valid(i)) continue;
        double p = pred_aligned.values[(size_t)i], g = gt.values[(size_t)i];
        double ratio = std::max(p / g, g / p);
        if (ratio < 1.25) ++hit;
        ++n;
    }
    if (n == 0) throw ValueError("delta1: empty valid intersection");
    return (double)hit / (double)n;
}

std::array<BandStats, kNumBands> range_breakdown(const DepthMap& pred_aligned, const DepthMap& gt) {
    check_same_size(pred_aligned, gt, "range_breakdown");
    PercentileStats st = percentiles(gt);
    std::array<int64_t, kNumBands> hits{};
    std::array<int64_t, kNumBands> counts{};
    for (int64_t i = 0; i < gt.pixels(); ++i) {
        if (!pred_aligned.is_valid(i) || !gt.is_valid(i)) continue;
        double g = gt.values[(size_t)i];
        double pos = (g - st.d2) / (st.d98 - st.d2);
        pos = pos < 0.0 ? 0.0 : (pos > 1.0 ? 1.0 : pos);
        int band = pos < 0.2 ? 0 : (pos < 0.4 ? 1 : (pos < 0.6 ? 2 : 3));
        double p = pred_aligned.values[(size_t)i];
        double ratio = std::max(p / g, g / p);
        if (ratio < 1.25) ++hits[(size_t)band];
        ++counts[(size_t)band];
    }
    std::array<BandStats, kNumBands> out;
    for (int b = 0; b < kNumBands; ++b) {
        out[(size_t)b].pixels = counts[(size_t)b];
        out[(size_t)b].present = counts[(size_t)b] > 0;
        out[(size_t)b].delta1 =
            counts[(size_t)b] > 0 ? (double)hits[(size_t)b] / (double)counts[(size_t)b] : 0.0;
    }
    return out;
}

MetricReport evaluate_image(const DepthMap& pred, const DepthMap& gt) {
    AlignResult a = align(pred, gt);
    MetricReport r;
    r.absrel = absrel(a.aligned, gt);
    r.delta1 = delta1(a.aligned, gt);
    r.bands = range_breakdown(a.aligned, gt);
    for (const auto& b : r.bands) r.valid_pixels += b.pixels;
    return r;
}

MetricReport aggregate_reports(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw ValueError("aggregate_reports: no reports");
    MetricReport agg;
    std::array<double, kNumBands> hit_px{};
    for (const auto& r : reports) {
        agg.absrel += r.absrel;
        agg.delta1 += r.delta1;
        agg.valid_pixels += r.valid_pixels;
        for (int b = 0; b < kNumBands; ++b) {
            agg.bands[(size_t)b].pixels += r.bands[(size_t)b].pixels;
            hit_px[(size_t)b] += r.bands[(size_t)b].delta1 * (double)r.bands[(size_t)b].pixels;
        }
    }
    agg.absrel /= (double)reports.size();
    agg.delta1 /= (double)reports.size();
    for (int b = 0; b < kNumBands; ++b) {
        auto& band = agg.bands[(size_t)b];
        band.present = band.pixels > 0;
        band.delta1 = band.pixels > 0 ? hit_px[(size_t)b] / (double)band.pixels : 0.0;
    }
    return agg;
}

void write_metrics_csv(const std::string& path, const std::vector<std::string>& names,
                       const std::vector<MetricReport>& reports) {
    if (names.size() != reports.size()) throw ValueError("write_metrics_csv: size mismatch");
    atomic_write_file(path, [&](std::ostream& os) {
        os << "name,absrel,delta1,valid_pixels";
        for (int b = 0; b < kNumBands; ++b)
            os << ",band" << b + 1 << "_delta1,band" << b + 1 << "_pixels";
        os << "\n";
        auto row = [&](const std::string& name, const MetricReport& r) {
            os << name << "," << r.absrel << "," << r.delta1 << "," << r.valid_pixels;
            for (int b = 0; b < kNumBands; ++b) {
                const auto& band = r.bands[(size_t)b];
                os << ",";
                if (band.present) os << band.delta1;
                os << "," << band.pixels;
            }
            os << "\n";
        };
        for (size_t i = 0; i < reports.size(); ++i) row(names[i], reports[i]);
        row("aggregate", aggregate_reports(reports));
    });
}

}  // namespace diffdepth
