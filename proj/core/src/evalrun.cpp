#include "diffdepth/evalrun.hpp"

#include "diffdepth/codec.hpp"

namespace diffdepth {

std::vector<MetricReport> evaluate_model(const UNetParams<float>& model,
                                         const NoiseSchedule& sched,
                                         const std::vector<Sample>& eval_set,
                                         int64_t latent_factor, const InferSettings& settings) {
    std::vector<MetricReport> reports;
    reports.reserve(eval_set.size());
    UNetParams<float> view = inference_view(model);
    for (size_t i = 0; i < eval_set.size(); ++i) {
        const Sample& s = eval_set[i];
        Tensor<float> z_cond = encode_latent(s.image, latent_factor);
        InferSettings per = settings;
        per.seed = Rng(settings.seed).stream("eval-image", (uint64_t)i).key();
        DepthMap pred = ensemble_infer(view, sched, z_cond, latent_factor, per);
        reports.push_back(evaluate_image(pred, s.depth));
    }
    return reports;
}

}  // namespace diffdepth
