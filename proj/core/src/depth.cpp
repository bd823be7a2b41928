#include "diffdepth/depth.hpp"

#include <algorithm>
#include <cmath>

#include "diffdepth/errors.hpp"

namespace diffdepth {

PercentileStats percentiles(const DepthMap& d) {
    std::vector<double> vals;
    vals.reserve((size_t)d.pixels());
    for (int64_t i = 0; i < d.pixels(); ++i)
        if (d.is_valid(i)) vals.push_back((double)d.values[(size_t)i]);
    if (vals.empty()) throw ValueError("percentiles: no valid pixels");
    if (vals.size() < 2) throw ValueError("percentiles: need at least 2 valid pixels");
    std::sort(vals.begin(), vals.end());
    auto interp = [&](double q) {
        double pos = q * (double)(vals.size() - 1);
        size_t lo = (size_t)pos;
        double frac = pos - (double)lo;
        if (lo + 1 >= vals.size()) return vals.back();
        return vals[lo] + frac * (vals[lo + 1] - vals[lo]);
    };
    PercentileStats s{interp(0.02), interp(0.98)};
    if (!(s.d2 < s.d98))
        throw ValueError("percentiles: degenerate map, d2 == d98 == " + std::to_string(s.d2));
    return s;
}

DepthMap normalize_depth(const DepthMap& d, const PercentileStats& s) {
    if (!(s.d2 < s.d98)) throw ValueError("normalize_depth: degenerate percentile stats");
    DepthMap out(d.height, d.width, "norm");
    double range = s.d98 - s.d2;
    for (int64_t i = 0; i < d.pixels(); ++i) {
        if (!d.is_valid(i)) {
            out.values[(size_t)i] = 0.f;
            out.valid[(size_t)i] = 0;
            continue;
        }
        double v = 2.0 * (((double)d.values[(size_t)i] - s.d2) / range - 0.5);
        out.values[(size_t)i] = (float)std::clamp(v, -1.0, 1.0);
    }
    return out;
}

DepthMap denormalize_depth(const DepthMap& dn, const PercentileStats& s) {
    if (!(s.d2 < s.d98)) throw ValueError("denormalize_depth: degenerate percentile stats");
    DepthMap out(dn.height, dn.width, "m");
    double range = s.d98 - s.d2;
    for (int64_t i = 0; i < dn.pixels(); ++i) {
        if (!dn.is_valid(i)) {
            out.values[(size_t)i] = 0.f;
            out.valid[(size_t)i] = 0;
            continue;
        }
        out.values[(size_t)i] = (float)(((double)dn.values[(size_t)i] / 2.0 + 0.5) * range + s.d2);
    }
    return out;
}

}  // namespace diffdepth
