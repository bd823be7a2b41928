#include <benchmark/benchmark.h>

#include "diffdepth/fft.hpp"
#include "diffdepth/trainer.hpp"
#include "diffdepth/unet.hpp"

using namespace diffdepth;

namespace {

Tensor<float> randn(Shape shp, uint64_t seed) {
    Rng rng(seed);
    Tensor<float> t(std::move(shp));
    for (auto& v : t.data) v = (float)rng.normal();
    return t;
}

void BM_conv2d_forward(benchmark::State& state) {
    int64_t c = state.range(0);
    auto x = make_const<float>(randn({c, 16, 16}, 1));
    auto w = make_leaf<float>(randn({c, c, 3, 3}, 2), false);
    auto b = make_leaf<float>(randn({c}, 3), false);
    for (auto _ : state) {
        auto y = conv2d(x, w, b);
        benchmark::DoNotOptimize(y->value.data.data());
    }
}
BENCHMARK(BM_conv2d_forward)->Arg(32)->Arg(64);

void BM_conv2d_train(benchmark::State& state) {
    int64_t c = state.range(0);
    auto x = make_leaf<float>(randn({c, 16, 16}, 1), true);
    auto w = make_leaf<float>(randn({c, c, 3, 3}, 2), true);
    auto b = make_leaf<float>(randn({c}, 3), true);
    for (auto _ : state) {
        zero_grad(x);
        zero_grad(w);
        zero_grad(b);
        auto loss = mean_all(mul(conv2d(x, w, b), x));
        backward(loss);
        benchmark::DoNotOptimize(w->grad.data.data());
    }
}
BENCHMARK(BM_conv2d_train)->Arg(32)->Arg(64);

void BM_rfft2(benchmark::State& state) {
    Tensor<float> x = randn({16, 16, 16}, 4);
    for (auto _ : state) {
        Tensor<float> s = rfft2_raw(x);
        benchmark::DoNotOptimize(s.data.data());
    }
}
BENCHMARK(BM_rfft2);

void BM_lfm_forward(benchmark::State& state) {
    UNetConfig cfg;
    cfg.cond_channels = 12;
    cfg.depth_channels = 4;
    cfg.latent_h = 16;
    cfg.latent_w = 16;
    cfg.base_channels = 32;
    cfg.time_embed_dim = 32;
    cfg.n_masks = 4;
    auto params = init_unet_params<float>(cfg, 7);
    auto bank = unetdetail::bank_at(params, "dec1");
    auto router = unetdetail::router_at(params, "dec1");
    auto x = make_const<float>(randn({64, 8, 8}, 5));
    for (auto _ : state) {
        auto y = lfm_forward(x, bank, router);
        benchmark::DoNotOptimize(y->value.data.data());
    }
}
BENCHMARK(BM_lfm_forward);

void BM_unet_forward(benchmark::State& state) {
    UNetConfig cfg;
    cfg.cond_channels = 48;
    cfg.depth_channels = 16;
    cfg.latent_h = 16;
    cfg.latent_w = 16;
    auto params = init_unet_params<float>(cfg, 7);
    auto zt = make_const<float>(randn({16, 16, 16}, 8));
    auto zc = make_const<float>(randn({48, 16, 16}, 9));
    for (auto _ : state) {
        auto y = predict_noise(zt, zc, 100, params);
        benchmark::DoNotOptimize(y->value.data.data());
    }
}
BENCHMARK(BM_unet_forward);

void BM_train_step(benchmark::State& state) {
    RunConfig cfg;
    cfg.data_count = 16;
    cfg.batch_size = 8;
    auto data = generate(cfg.scene(), cfg.data_count);
    Trainer t(cfg, data);
    for (auto _ : state) {
        TrainLogRow row = t.step();
        benchmark::DoNotOptimize(row.loss_total);
    }
}
BENCHMARK(BM_train_step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
