#include <doctest.h>

#include "diffdepth/schedule.hpp"
#include "oracles.hpp"

using namespace diffdepth;

TEST_SUITE_BEGIN("schedule");

TEST_CASE("single-step schedule") {
    NoiseSchedule s = build_schedule(1, 0.5, 0.5, ScheduleKind::Linear);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.5));
    CHECK(s.snr_at(1) == doctest::Approx(1.0));
    CHECK(s.snr_max == doctest::Approx(1.0));
}

TEST_CASE("two-step linear schedule products") {
    NoiseSchedule s = build_schedule(2, 0.1, 0.2, ScheduleKind::Linear);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.9));
    CHECK(s.alpha_bar_at(2) == doctest::Approx(0.72));
}

TEST_CASE("thousand-step scaled-linear table is monotone and ends low") {
    NoiseSchedule s = build_schedule(1000, 0.00085, 0.012, ScheduleKind::ScaledLinear);
    for (int64_t t = 2; t <= 1000; ++t) {
        CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
        CHECK(s.snr_at(t) < s.snr_at(t - 1));
        CHECK(s.beta_at(t) >= s.beta_at(t - 1));
    }
    CHECK(s.alpha_bar_at(1000) < 1e-2);
    CHECK(s.snr_max == s.snr_at(1));
    // scaled-linear interpolates sqrt(beta) linearly then squares
    double rb = std::sqrt(0.00085) + 0.5 * (std::sqrt(0.012) - std::sqrt(0.00085));
    CHECK(s.beta_at(500) == doctest::Approx(rb * rb).epsilon(1e-3));
}

TEST_CASE("invalid schedule parameters are rejected") {
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2, ScheduleKind::Linear), ValueError);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2, ScheduleKind::Linear), ValueError);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2, ScheduleKind::Linear), ValueError);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 1.0, ScheduleKind::Linear), ValueError);
}

TEST_CASE("forward noising endpoint and coefficients") {
    NoiseSchedule tiny = build_schedule(1, 1e-8, 1e-8, ScheduleKind::Linear);
    Tensor<double> z0({4}, {1.0, -2.0, 0.5, 3.0});
    Tensor<double> eps({4}, {0.3, 0.7, -1.1, 0.9});
    Tensor<double> zt = forward_noise(z0, 1, eps, tiny);
    for (int64_t i = 0; i < 4; ++i) CHECK(zt[i] == doctest::Approx(z0[i]).epsilon(1e-3));

    // alpha_bar = 0.25: z_t = 0.5 z0 + sqrt(0.75) eps
    NoiseSchedule s = build_schedule(1, 0.75, 0.75, ScheduleKind::Linear);
    Tensor<double> zt2 = forward_noise(z0, 1, eps, s);
    for (int64_t i = 0; i < 4; ++i)
        CHECK(zt2[i] == doctest::Approx(0.5 * z0[i] + std::sqrt(0.75) * eps[i]));
    CHECK_THROWS_AS(forward_noise(z0, 2, eps, s), ValueError);
}

TEST_CASE("forward noise sample variance matches 1 - alpha_bar") {
    NoiseSchedule s = build_schedule(100, 0.001, 0.05, ScheduleKind::Linear);
    int64_t t = 60;
    double expected = 1.0 - s.alpha_bar_at(t);
    Rng rng(51);
    int64_t n = 100000;
    double sum = 0, sum2 = 0;
    Tensor<double> z0({1});
    for (int64_t i = 0; i < n; ++i) {
        Tensor<double> eps({1}, {rng.normal()});
        double v = forward_noise(z0, t, eps, s)[0];
        sum += v;
        sum2 += v * v;
    }
    double var = sum2 / (double)n - (sum / (double)n) * (sum / (double)n);
    CHECK(var == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("ddim step: final step returns the clean-latent estimate") {
    NoiseSchedule s = build_schedule(50, 0.001, 0.2, ScheduleKind::ScaledLinear);
    Rng rng(52);
    Tensor<double> z0 = oracle::random_tensor({2, 4, 4}, rng);
    Tensor<double> eps = oracle::random_tensor({2, 4, 4}, rng);
    int64_t t = 37;
    Tensor<double> zt = forward_noise(z0, t, eps, s);
    // the true eps inverts the forward map exactly
    Tensor<double> rec = ddim_step(zt, eps, t, 0, s);
    for (int64_t i = 0; i < rec.numel(); ++i)
        CHECK(rec[i] == doctest::Approx(z0[i]).epsilon(1e-9));
    CHECK_THROWS_AS(ddim_step(zt, eps, t, t, s), ValueError);
    CHECK_THROWS_AS(ddim_step(zt, eps, 0, 0, s), ValueError);
}

TEST_CASE("full reverse trajectory with the closed-form predictor recovers z0") {
    // oracle denoiser: eps(z_t, t) = (z_t - sqrt(ab) z0) / sqrt(1 - ab)
    NoiseSchedule s = build_schedule(200, 0.00085, 0.06, ScheduleKind::ScaledLinear);
    Rng rng(53);
    Tensor<double> z0 = oracle::random_tensor({3, 4, 4}, rng);
    for (int64_t steps : {1, 5, 20, 50}) {
        Tensor<double> z = oracle::random_tensor({3, 4, 4}, rng);  // start from pure noise
        auto ts = ddim_timesteps(s.T, steps);
        CHECK((int64_t)ts.size() == steps);
        for (size_t i = 0; i < ts.size(); ++i) {
            int64_t t = ts[i];
            int64_t t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
            double ab = s.alpha_bar_at(t);
            Tensor<double> eps_hat(z.shape);
            for (int64_t j = 0; j < z.numel(); ++j)
                eps_hat[j] = (z[j] - std::sqrt(ab) * z0[j]) / std::sqrt(1.0 - ab);
            z = ddim_step(z, eps_hat, t, t_prev, s);
        }
        double max_err = 0;
        for (int64_t j = 0; j < z.numel(); ++j) max_err = std::max(max_err, std::abs(z[j] - z0[j]));
        CHECK(max_err < 1e-4);
    }
}

TEST_CASE("ddim timestep spacing is strictly decreasing and in range") {
    for (int64_t T : {200, 1000})
        for (int64_t k : {1, 5, 20, 50}) {
            auto ts = ddim_timesteps(T, k);
            CHECK(ts.front() == T);
            for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
            CHECK(ts.back() >= 1);
        }
    CHECK_THROWS_AS(ddim_timesteps(10, 11), ValueError);
}

TEST_CASE("snr ramp arithmetic") {
    CHECK(snr_ramp(0.5, 1.0, 5.0) == doctest::Approx(0.03125));
    CHECK(snr_ramp(1.0, 1.0, 5.0) == doctest::Approx(1.0));
    NoiseSchedule s = build_schedule(200, 0.00085, 0.06, ScheduleKind::ScaledLinear);
    double prev = 2.0;
    for (int64_t t = 1; t <= s.T; ++t) {
        double eta = snr_ramp(s.snr_at(t), s.snr_max, 5.0);
        CHECK(eta <= prev);
        CHECK(eta >= 0.0);
        CHECK(eta <= 1.0);
        prev = eta;
    }
    CHECK(snr_ramp(s.snr_at(s.T), s.snr_max, 5.0) < 1e-3);
}

TEST_SUITE_END();
