#include "diffdepth/sampler.hpp"

#include "diffdepth/codec.hpp"

namespace diffdepth {

UNetParams<float> inference_view(const UNetParams<float>& model) {
    UNetParams<float> view;
    view.cfg = model.cfg;
    for (const auto& [name, p] : model.store.items) {
        view.store.index[name] = view.store.items.size();
        view.store.items.emplace_back(name, make_const<float>(Tensor<float>(p->value)));
    }
    return view;
}

Tensor<float> ddim_sample(const UNetParams<float>& model, const NoiseSchedule& sched,
                          const Tensor<float>& z_cond, int64_t steps, const Rng& rng) {
    const UNetConfig& cfg = model.cfg;
    Tensor<float> z({cfg.depth_channels, z_cond.dim(1), z_cond.dim(2)});
    Rng noise = rng;
    for (int64_t i = 0; i < z.numel(); ++i) z[i] = (float)noise.normal();

    Var<float> cond = make_const<float>(Tensor<float>(z_cond));
    std::vector<int64_t> ts = ddim_timesteps(sched.T, steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        int64_t t = ts[i];
        int64_t t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
        Var<float> eps_hat = predict_noise(make_const<float>(Tensor<float>(z)), cond, t, model);
        z = ddim_step(z, eps_hat->value, t, t_prev, sched);
    }
    return z;
}

DepthMap ensemble_infer(const UNetParams<float>& model, const NoiseSchedule& sched,
                        const Tensor<float>& z_cond, int64_t latent_factor,
                        const InferSettings& settings) {
    if (settings.runs < 1) throw ValueError("ensemble_infer: need runs >= 1");
    UNetParams<float> view = inference_view(model);
    int64_t H = z_cond.dim(1) * latent_factor, W = z_cond.dim(2) * latent_factor;
    std::vector<double> acc((size_t)(H * W), 0.0);
    Rng base(settings.seed);
    for (int64_t run = 0; run < settings.runs; ++run) {
        Rng run_rng = base.stream("ensemble", (uint64_t)run);
        Tensor<float> z0 = ddim_sample(view, sched, z_cond, settings.ddim_steps, run_rng);
        Tensor<float> dn = decode_latent(z0, latent_factor, 1);  // [1,H,W]
        for (int64_t i = 0; i < H * W; ++i) acc[(size_t)i] += (double)dn[i];
    }
    DepthMap out(H, W, "norm");
    for (int64_t i = 0; i < H * W; ++i)
        out.values[(size_t)i] = (float)(acc[(size_t)i] / (double)settings.runs);
    return out;
}

}  // namespace diffdepth
