#pragma once

#include <cmath>
#include <vector>

#include "diffdepth/ops.hpp"

namespace diffdepth {

template <class S>
Var<S> linear(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
    Var<S> y = matmul(x, w);
    return b ? add_rowvec(y, b) : y;
}

template <class S>
struct AttentionParams {
    Var<S> wq, bq, wk, bk, wv, bv, wo, bo;
    int heads = 4;
};

// Multi-head self-attention over token rows [n, c]. Queries/keys/values are
// linear projections; softmax over key positions; heads concatenated then
// linearly projected.
template <class S>
Var<S> self_attention(const Var<S>& x, const AttentionParams<S>& p) {
    int64_t c = x->value.dim(1);
    if (c % p.heads != 0)
        throw ShapeError("self_attention: channels " + std::to_string(c) +
                         " not divisible by heads " + std::to_string(p.heads));
    int64_t dh = c / p.heads;
    Var<S> q = linear(x, p.wq, p.bq);
    Var<S> k = linear(x, p.wk, p.bk);
    Var<S> v = linear(x, p.wv, p.bv);
    std::vector<Var<S>> head_outs;
    head_outs.reserve((size_t)p.heads);
    double scale = 1.0 / std::sqrt((double)dh);
    for (int hd = 0; hd < p.heads; ++hd) {
        Var<S> qh = slice_last(q, hd * dh, dh);
        Var<S> kh = slice_last(k, hd * dh, dh);
        Var<S> vh = slice_last(v, hd * dh, dh);
        Var<S> scores = mul_scalar(matmul(qh, transpose2(kh)), scale);
        Var<S> attn = softmax_axis(scores, 1);
        head_outs.push_back(matmul(attn, vh));
    }
    Var<S> merged = p.heads == 1 ? head_outs[0] : concat_last(head_outs);
    return linear(merged, p.wo, p.bo);
}

// Self-attention on a [c,h,w] feature map, tokens = spatial positions.
template <class S>
Var<S> self_attention_2d(const Var<S>& x, const AttentionParams<S>& p) {
    int64_t h = x->value.dim(1), w = x->value.dim(2);
    return tokens_to_spatial(self_attention(spatial_to_tokens(x), p), h, w);
}

// Sinusoidal timestep embedding: first half sines, second half cosines over
// log-spaced frequencies from 1 down to 1/10000.
template <class S>
Tensor<S> timestep_embedding(int64_t t, int64_t dim) {
    Tensor<S> e({1, dim});
    int64_t half = dim / 2;
    for (int64_t i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * (double)i / (double)half);
        double ang = (double)t * freq;
        e[i] = (S)std::sin(ang);
        e[half + i] = (S)std::cos(ang);
    }
    return e;
}

}  // namespace diffdepth
