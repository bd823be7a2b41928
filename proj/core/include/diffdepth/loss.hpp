#pragma once

#include <vector>

#include "diffdepth/ops.hpp"

// Training objective: weighted squared noise-prediction error plus a
// variance regularizer on the raw error.

namespace diffdepth {

template <class S>
struct LossTerms {
    Var<S> latent;  // scalar
    Var<S> var;     // scalar
    Var<S> total;   // latent + lambda * var
};

// (1/M) sum_i w_i * (eps_hat_i - eps_i)^2; the [h,w] weight map is
// broadcast across channels. Pass a null weight for uniform weighting.
template <class S>
Var<S> latent_loss(const Var<S>& eps_hat, const Var<S>& eps, const Var<S>& w_final) {
    check_same_shape(eps_hat->value, eps->value, "latent_loss");
    Var<S> err = sub(eps_hat, eps);
    Var<S> se = mul(err, err);
    if (w_final) {
        if (eps_hat->value.rank() != 3 || w_final->value.rank() != 2 ||
            w_final->value.dim(0) != eps_hat->value.dim(1) ||
            w_final->value.dim(1) != eps_hat->value.dim(2))
            throw ShapeError("latent_loss: weight map must be [h,w] matching error spatial dims");
        se = mul_bcast_hw(se, w_final);
    }
    return mean_all(se);
}

// Population variance of the prediction error over all elements.
template <class S>
Var<S> variance_loss(const Var<S>& eps_hat, const Var<S>& eps) {
    check_same_shape(eps_hat->value, eps->value, "variance_loss");
    Var<S> err = sub(eps_hat, eps);
    Var<S> centered = sub_bcast_scalar(err, mean_all(err));
    return mean_all(mul(centered, centered));
}

template <class S>
LossTerms<S> total_loss(const Var<S>& eps_hat, const Var<S>& eps, const Var<S>& w_final,
                        double lambda = 1.0) {
    if (lambda < 0.0) throw ValueError("total_loss: lambda must be >= 0");
    LossTerms<S> t;
    t.latent = latent_loss(eps_hat, eps, w_final);
    t.var = variance_loss(eps_hat, eps);
    t.total = lambda == 0.0 ? t.latent : add(t.latent, mul_scalar(t.var, lambda));
    return t;
}

}  // namespace diffdepth
