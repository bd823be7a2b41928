#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffdepth/depth.hpp"
#include "diffdepth/graph.hpp"
#include "diffdepth/ops.hpp"
#include "diffdepth/schedule.hpp"

// Supervision reweighting. Two spatial difficulty cues from the normalized
// ground-truth depth (distance and structure) are pooled to latent
// resolution, fused by a learnable sigmoid gate, normalized to unit batch
// mean, and blended towards uniform weighting by an SNR-driven ramp.

namespace diffdepth {

enum class PoolMode { Average, Max };

inline PoolMode pool_mode_from_string(const std::string& s) {
    if (s == "avg") return PoolMode::Average;
    if (s == "max") return PoolMode::Max;
    throw ValueError("unknown pool mode '" + s + "' (want avg|max)");
}

// w_dist = (d_norm + 1)/2 in [0,1]; far pixels weigh more. Invalid pixels
// get weight 0.
inline Tensor<float> distance_weight(const DepthMap& dn) {
    Tensor<float> w({dn.height, dn.width});
    for (int64_t i = 0; i < dn.pixels(); ++i)
        w[i] = dn.is_valid(i) ? (dn.values[(size_t)i] + 1.f) * 0.5f : 0.f;
    return w;
}

// Gradient-magnitude weight, normalized by the per-image maximum (or left
// at zero for flat images). Central differences inside, one-sided at the
// borders, so a linear ramp yields a uniform weight of 1.
inline Tensor<float> structure_weight(const DepthMap& dn) {
    if (dn.height < 2 || dn.width < 2) throw ShapeError("structure_weight: need H,W >= 2");
    int64_t h = dn.height, w = dn.width;
    Tensor<float> g({h, w});
    double maxg = 0.0;
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            double gx, gy;
            if (x == 0)
                gx = dn.at(y, 1) - dn.at(y, 0);
            else if (x == w - 1)
                gx = dn.at(y, w - 1) - dn.at(y, w - 2);
            else
                gx = (dn.at(y, x + 1) - dn.at(y, x - 1)) * 0.5;
            if (y == 0)
                gy = dn.at(1, x) - dn.at(0, x);
            else if (y == h - 1)
                gy = dn.at(h - 1, x) - dn.at(h - 2, x);
            else
                gy = (dn.at(y + 1, x) - dn.at(y - 1, x)) * 0.5;
            double m = std::sqrt(gx * gx + gy * gy);
            g.at(y, x) = (float)m;
            if (m > maxg) maxg = m;
        }
    if (maxg >= 1e-12) {
        for (int64_t i = 0; i < g.numel(); ++i) g[i] = (float)(g[i] / maxg);
    } else {
        std::fill(g.data.begin(), g.data.end(), 0.f);
    }
    for (int64_t i = 0; i < dn.pixels(); ++i)
        if (!dn.is_valid(i)) g[i] = 0.f;
    return g;
}

// Pool an [H,W] weight map down by r.
inline Tensor<float> pool_weight(const Tensor<float>& w, int64_t r, PoolMode mode) {
    if (w.rank() != 2) throw ShapeError("pool_weight: want [H,W]");
    if (w.dim(0) % r || w.dim(1) % r)
        throw ShapeError("pool_weight: extents not divisible by " + std::to_string(r));
    int64_t oh = w.dim(0) / r, ow = w.dim(1) / r;
    Tensor<float> out({oh, ow});
    for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
            if (mode == PoolMode::Average) {
                double acc = 0.0;
                for (int64_t dy = 0; dy < r; ++dy)
                    for (int64_t dx = 0; dx < r; ++dx) acc += w.at(oy * r + dy, ox * r + dx);
                out.at(oy, ox) = (float)(acc / (double)(r * r));
            } else {
                float best = w.at(oy * r, ox * r);
                for (int64_t dy = 0; dy < r; ++dy)
                    for (int64_t dx = 0; dx < r; ++dx)
                        best = std::max(best, w.at(oy * r + dy, ox * r + dx));
                out.at(oy, ox) = best;
            }
        }
    return out;
}

// Asymmetric pooling to latent resolution: average for the smooth distance
// map, max for the sparse structure map (modes overridable for ablation).
inline std::pair<Tensor<float>, Tensor<float>> pool_weights(const Tensor<float>& w_dist,
                                                            const Tensor<float>& w_struct,
                                                            int64_t r,
                                                            PoolMode dist_mode = PoolMode::Average,
                                                            PoolMode struct_mode = PoolMode::Max) {
    return {pool_weight(w_dist, r, dist_mode), pool_weight(w_struct, r, struct_mode)};
}

template <class S>
struct GateResult {
    std::vector<Var<S>> w;  // normalized weight map per batch element
    Var<S> g_mean;          // batch-wise mean of the gate
};

// g = sigmoid(product - tau), w = g / (mean(g) + kappa), the mean taken
// over every element of the batch. Differentiable in tau, including
// through the batch mean.
template <class S>
GateResult<S> gate_and_normalize(const std::vector<Var<S>>& products, const Var<S>& tau,
                                 double kappa = 1e-6) {
    if (products.empty()) throw ValueError("gate_and_normalize: empty batch");
    std::vector<Var<S>> gates;
    gates.reserve(products.size());
    for (const auto& p : products) {
        check_same_shape(p->value, products[0]->value, "gate_and_normalize");
        gates.push_back(sigmoid(sub_bcast_scalar(p, tau)));
    }
    Var<S> g_mean = mean_all(gates.size() == 1 ? gates[0] : concat_flat(gates));
    Var<S> denom = add_scalar(g_mean, kappa);
    GateResult<S> out;
    out.g_mean = g_mean;
    out.w.reserve(gates.size());
    for (const auto& g : gates) out.w.push_back(div_bcast_scalar(g, denom));
    return out;
}

// w_final = (1 - eta_t) * 1 + eta_t * w with eta_t = (snr_t/snr_max)^gamma.
template <class S>
Var<S> temporal_modulate(const Var<S>& w, int64_t t, const NoiseSchedule& sched, double gamma) {
    sched.check_t(t, "temporal_modulate");
    double eta = snr_ramp(sched.snr_at(t), sched.snr_max, gamma);
    return add_scalar(mul_scalar(w, eta), 1.0 - eta);
}

}  // namespace diffdepth
