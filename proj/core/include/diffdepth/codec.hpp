#pragma once

#include "diffdepth/tensor.hpp"

// Deterministic, lossless latent codec: space-to-depth rearrangement by a
// factor r. Each r x r spatial block of a [k,H,W] image becomes r*r*k
// channels of a [r*r*k, H/r, W/r] latent; decode is the exact inverse.

namespace diffdepth {

template <class S>
Tensor<S> encode_latent(const Tensor<S>& img, int64_t r) {
    if (img.rank() != 3) throw ShapeError("encode_latent: want [k,H,W]");
    if (r < 1) throw ValueError("encode_latent: factor must be >= 1");
    int64_t k = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (H % r || W % r)
        throw ShapeError("encode_latent: dims " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by " + std::to_string(r));
    int64_t h = H / r, w = W / r;
    Tensor<S> z({r * r * k, h, w});
    for (int64_t ki = 0; ki < k; ++ki)
        for (int64_t dy = 0; dy < r; ++dy)
            for (int64_t dx = 0; dx < r; ++dx) {
                int64_t c = ki * r * r + dy * r + dx;  // row-major block order
                for (int64_t y = 0; y < h; ++y)
                    for (int64_t x = 0; x < w; ++x)
                        z.at(c, y, x) = img.at(ki, y * r + dy, x * r + dx);
            }
    return z;
}

template <class S>
Tensor<S> decode_latent(const Tensor<S>& z, int64_t r, int64_t k) {
    if (z.rank() != 3) throw ShapeError("decode_latent: want [c,h,w]");
    if (z.dim(0) != r * r * k)
        throw ShapeError("decode_latent: channels " + std::to_string(z.dim(0)) + " != r*r*k = " +
                         std::to_string(r * r * k));
    int64_t h = z.dim(1), w = z.dim(2);
    Tensor<S> img({k, h * r, w * r});
    for (int64_t ki = 0; ki < k; ++ki)
        for (int64_t dy = 0; dy < r; ++dy)
            for (int64_t dx = 0; dx < r; ++dx) {
                int64_t c = ki * r * r + dy * r + dx;
                for (int64_t y = 0; y < h; ++y)
                    for (int64_t x = 0; x < w; ++x)
                        img.at(ki, y * r + dy, x * r + dx) = z.at(c, y, x);
            }
    return img;
}

}  // namespace diffdepth
