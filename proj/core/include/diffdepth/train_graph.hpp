#pragma once

#include <cmath>
#include <vector>

#include "diffdepth/biasmap.hpp"
#include "diffdepth/codec.hpp"
#include "diffdepth/loss.hpp"
#include "diffdepth/schedule.hpp"
#include "diffdepth/synthdata.hpp"
#include "diffdepth/unet.hpp"

// One training step as an autodiff graph, templated on the scalar type so
// the whole pipeline (model, spectral block, gate, losses) can be re-run
// in 64-bit for finite-difference checks.

namespace diffdepth {

template <class S>
struct PreparedSample {
    Tensor<S> z0;       // clean depth latent
    Tensor<S> zcond;    // conditioning image latent
    Tensor<S> product;  // pooled w_dist (*) w_struct at latent resolution
};

struct PrepOptions {
    int64_t latent_factor = 4;
    bool w_dist_on = true;
    bool w_struct_on = true;
    PoolMode dist_pool = PoolMode::Average;
    PoolMode struct_pool = PoolMode::Max;
};

template <class S>
PreparedSample<S> prepare_sample(const Sample& sample, const PrepOptions& opt) {
    PreparedSample<S> out;
    int64_t r = opt.latent_factor;
    PercentileStats st = percentiles(sample.depth);
    DepthMap dn = normalize_depth(sample.depth, st);

    Tensor<float> dmap({1, dn.height, dn.width});
    std::copy(dn.values.begin(), dn.values.end(), dmap.data.begin());
    out.z0 = encode_latent(dmap, r).template cast<S>();
    out.zcond = encode_latent(sample.image, r).template cast<S>();

    int64_t lh = dn.height / r, lw = dn.width / r;
    Tensor<float> prod({lh, lw});
    if (opt.w_dist_on || opt.w_struct_on) {
        Tensor<float> wd = opt.w_dist_on ? pool_weight(distance_weight(dn), r, opt.dist_pool)
                                         : Tensor<float>::full({lh, lw}, 1.f);
        Tensor<float> ws = opt.w_struct_on ? pool_weight(structure_weight(dn), r, opt.struct_pool)
                                           : Tensor<float>::full({lh, lw}, 1.f);
        for (int64_t i = 0; i < prod.numel(); ++i) prod[i] = wd[i] * ws[i];
    } else {
        std::fill(prod.data.begin(), prod.data.end(), 1.f);
    }
    out.product = prod.cast<S>();
    return out;
}

struct StepSettings {
    double gamma = 5.0;
    double lambda_var = 1.0;
    bool biasmap_on = true;
    bool var_loss_on = true;
};

template <class S>
struct StepGraph {
    Var<S> total, latent, var;
    std::vector<int64_t> timesteps;
    double mean_eta = 0.0;
    double mean_wdev = 0.0;  // mean |w_final - 1| over batch elements
};

// Draws (t, eps) per sample from substreams of step_rng, runs the model,
// builds the weighted objective. tau may be null when the gate is off.
template <class S>
StepGraph<S> build_step_graph(const std::vector<const PreparedSample<S>*>& batch,
                              const UNetParams<S>& model, const Var<S>& tau,
                              const NoiseSchedule& sched, const StepSettings& st,
                              const Rng& step_rng) {
    if (batch.empty()) throw ValueError("build_step_graph: empty batch");
    size_t n = batch.size();
    std::vector<Var<S>> errs(n), weighted_se(n);
    std::vector<Var<S>> products;
    std::vector<int64_t> ts(n);
    StepGraph<S> out;

    for (size_t i = 0; i < n; ++i) {
        Rng tr = step_rng.stream("timesteps", (uint64_t)i);
        Rng nr = step_rng.stream("noise", (uint64_t)i);
        ts[i] = tr.uniform_int(1, sched.T);
        const PreparedSample<S>& ps = *batch[i];
        Tensor<S> eps(ps.z0.shape);
        for (int64_t j = 0; j < eps.numel(); ++j) eps[j] = (S)nr.normal();
        Tensor<S> zt = forward_noise(ps.z0, ts[i], eps, sched);
        Var<S> eps_hat = predict_noise(make_const<S>(std::move(zt)),
                                       make_const<S>(Tensor<S>(ps.zcond)), ts[i], model);
        errs[i] = sub(eps_hat, make_const<S>(Tensor<S>(std::move(eps))));
        if (st.biasmap_on) products.push_back(make_const<S>(Tensor<S>(ps.product)));
    }
    out.timesteps = ts;

    int64_t wdev_count = 0;
    double wdev_sum = 0.0, eta_sum = 0.0;
    if (st.biasmap_on) {
        GateResult<S> gate = gate_and_normalize(products, tau);
        for (size_t i = 0; i < n; ++i) {
            Var<S> w_final = temporal_modulate(gate.w[i], ts[i], sched, st.gamma);
            Var<S> se = mul(errs[i], errs[i]);
            weighted_se[i] = mul_bcast_hw(se, w_final);
            eta_sum += snr_ramp(sched.snr_at(ts[i]), sched.snr_max, st.gamma);
            for (int64_t j = 0; j < w_final->value.numel(); ++j) {
                wdev_sum += std::abs((double)w_final->value[j] - 1.0);
                ++wdev_count;
            }
        }
    } else {
        for (size_t i = 0; i < n; ++i) weighted_se[i] = mul(errs[i], errs[i]);
        wdev_count = 1;  // uniform weights: deviation 0
    }
    out.mean_eta = st.biasmap_on ? eta_sum / (double)n : 0.0;
    out.mean_wdev = wdev_sum / (double)std::max<int64_t>(wdev_count, 1);

    out.latent = mean_all(n == 1 ? weighted_se[0] : concat_flat(weighted_se));
    Var<S> errcat = n == 1 ? errs[0] : concat_flat(errs);
    Var<S> centered = sub_bcast_scalar(errcat, mean_all(errcat));
    out.var = mean_all(mul(centered, centered));
    out.total = st.var_loss_on && st.lambda_var > 0.0
                    ? add(out.latent, mul_scalar(out.var, st.lambda_var))
                    : out.latent;
    return out;
}

}  // namespace diffdepth
