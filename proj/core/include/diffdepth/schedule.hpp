#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "diffdepth/errors.hpp"
#include "diffdepth/tensor.hpp"

namespace diffdepth {

enum class ScheduleKind { Linear, ScaledLinear };

// Per-timestep diffusion coefficient tables. Index i holds timestep t=i+1.
// alpha_bar is the cumulative product of (1 - beta_t); snr_t =
// alpha_bar_t / (1 - alpha_bar_t) and is strictly decreasing, so snr_max is
// attained at t=1.
struct NoiseSchedule {
    int64_t T = 0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;
    std::vector<double> snr;
    double snr_max = 0.0;

    double beta_at(int64_t t) const { return beta[(size_t)(t - 1)]; }
    double alpha_bar_at(int64_t t) const { return t == 0 ? 1.0 : alpha_bar[(size_t)(t - 1)]; }
    double snr_at(int64_t t) const { return snr[(size_t)(t - 1)]; }
    void check_t(int64_t t, const char* what) const {
        if (t < 1 || t > T)
            throw ValueError(std::string(what) + ": timestep " + std::to_string(t) +
                             " outside [1, " + std::to_string(T) + "]");
    }
};

inline NoiseSchedule build_schedule(int64_t T, double beta_start, double beta_end,
                                    ScheduleKind kind) {
    if (T < 1) throw ValueError("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ValueError("build_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize((size_t)T);
    s.alpha_bar.resize((size_t)T);
    s.snr.resize((size_t)T);
    for (int64_t i = 0; i < T; ++i) {
        double f = T == 1 ? 0.0 : (double)i / (double)(T - 1);
        if (kind == ScheduleKind::Linear) {
            s.beta[(size_t)i] = beta_start + f * (beta_end - beta_start);
        } else {
            double rb = std::sqrt(beta_start) + f * (std::sqrt(beta_end) - std::sqrt(beta_start));
            s.beta[(size_t)i] = rb * rb;
        }
    }
    double prod = 1.0;
    for (int64_t i = 0; i < T; ++i) {
        prod *= 1.0 - s.beta[(size_t)i];
        s.alpha_bar[(size_t)i] = prod;
        s.snr[(size_t)i] = prod / (1.0 - prod);
    }
    s.snr_max = s.snr[0];
    return s;
}

inline ScheduleKind schedule_kind_from_string(const std::string& k) {
    if (k == "linear") return ScheduleKind::Linear;
    if (k == "scaled-linear") return ScheduleKind::ScaledLinear;
    throw ValueError("unknown schedule kind '" + k + "'");
}

// z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps
template <class S>
Tensor<S> forward_noise(const Tensor<S>& z0, int64_t t, const Tensor<S>& eps,
                        const NoiseSchedule& sched) {
    sched.check_t(t, "forward_noise");
    check_same_shape(z0, eps, "forward_noise");
    double ab = sched.alpha_bar_at(t);
    S ca = (S)std::sqrt(ab), cb = (S)std::sqrt(1.0 - ab);
    Tensor<S> out(z0.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = ca * z0[i] + cb * eps[i];
    return out;
}

// Deterministic DDIM update (eta = 0), with alpha_bar_0 defined as 1 so
// t_prev = 0 returns the predicted clean latent.
template <class S>
Tensor<S> ddim_step(const Tensor<S>& zt, const Tensor<S>& eps_hat, int64_t t, int64_t t_prev,
                    const NoiseSchedule& sched) {
    sched.check_t(t, "ddim_step");
    if (t_prev < 0 || t_prev >= t)
        throw ValueError("ddim_step: need t > t_prev >= 0, got t=" + std::to_string(t) +
                         " t_prev=" + std::to_string(t_prev));
    check_same_shape(zt, eps_hat, "ddim_step");
    double ab_t = sched.alpha_bar_at(t), ab_p = sched.alpha_bar_at(t_prev);
    S inv_sab = (S)(1.0 / std::sqrt(ab_t));
    S sb_t = (S)std::sqrt(1.0 - ab_t);
    S sab_p = (S)std::sqrt(ab_p), sb_p = (S)std::sqrt(1.0 - ab_p);
    Tensor<S> out(zt.shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
        S z0_hat = (zt[i] - sb_t * eps_hat[i]) * inv_sab;
        out[i] = sab_p * z0_hat + sb_p * eps_hat[i];
    }
    return out;
}

// Descending DDIM timestep sequence: round(j*T/steps) for j = steps..1.
// Pair t_j with t_{j-1} (and the last step with 0).
inline std::vector<int64_t> ddim_timesteps(int64_t T, int64_t steps) {
    if (steps < 1 || steps > T) throw ValueError("ddim_timesteps: need 1 <= steps <= T");
    std::vector<int64_t> ts((size_t)steps);
    for (int64_t j = steps; j >= 1; --j)
        ts[(size_t)(steps - j)] = (int64_t)std::llround((double)j * (double)T / (double)steps);
    return ts;
}

// Temporal ramp eta = (snr / snr_max)^gamma, clamped to [0, 1].
inline double snr_ramp(double snr, double snr_max, double gamma) {
    double r = std::pow(snr / snr_max, gamma);
    return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r);
}

}  // namespace diffdepth
