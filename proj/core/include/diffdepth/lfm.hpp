#pragma once

#include <string>
#include <vector>

#include "diffdepth/fft.hpp"
#include "diffdepth/nn.hpp"
#include "diffdepth/ops.hpp"

// Spectral feature modulation block. Features are filtered in the frequency
// domain by a bank of learnable magnitude masks (phase untouched); a
// content-aware router predicts a per-pixel softmax mix over the filtered
// candidates, and the mix is added back residually.

namespace diffdepth {

// Router designs, from a bare 1x1 projection up to the full local-extractor
// + self-attention pipeline. Fixed uses no router at all (uniform mix).
enum class RouterVariant { Fixed, PM, LE_PM, LE_LKC_PM, LE_SA_PM };

inline RouterVariant router_variant_from_string(const std::string& v) {
    if (v == "fixed") return RouterVariant::Fixed;
    if (v == "pm") return RouterVariant::PM;
    if (v == "le-pm") return RouterVariant::LE_PM;
    if (v == "le-lkc-pm") return RouterVariant::LE_LKC_PM;
    if (v == "le-sa-pm") return RouterVariant::LE_SA_PM;
    throw ValueError("unknown router variant '" + v + "'");
}

inline std::string router_variant_to_string(RouterVariant v) {
    switch (v) {
        case RouterVariant::Fixed: return "fixed";
        case RouterVariant::PM: return "pm";
        case RouterVariant::LE_PM: return "le-pm";
        case RouterVariant::LE_LKC_PM: return "le-lkc-pm";
        default: return "le-sa-pm";
    }
}

// N learnable half-spectrum masks over an h x (w/2+1) grid, shared across
// channels. Initialized to 1 (identity spectral response).
template <class S>
struct SpectralBank {
    int64_t grid_h = 0, grid_wh = 0;
    std::vector<Var<S>> masks;

    int64_t size() const { return (int64_t)masks.size(); }
};

template <class S>
struct RouterParams {
    RouterVariant variant = RouterVariant::LE_SA_PM;
    int64_t channels = 0;
    int64_t n_masks = 0;
    Var<S> conv1_w, conv1_b, conv2_w, conv2_b;  // local extractor (3x3 convs)
    Var<S> lkc_w, lkc_b;                        // large-kernel depthwise conv
    AttentionParams<S> attn;                    // self-attention
    Var<S> proj_w, proj_b;                      // 1x1 projection to n_masks
};

// Spatially-variant mixing map [N,h,w]; per-pixel softmax over the N
// candidates.
template <class S>
Var<S> route(const Var<S>& f_in, const RouterParams<S>& p) {
    if (f_in->value.rank() != 3) throw ShapeError("route: want [c,h,w]");
    if (p.variant == RouterVariant::Fixed) {
        int64_t n = p.n_masks < 1 ? 1 : p.n_masks;
        Tensor<S> uniform =
            Tensor<S>::full({n, f_in->value.dim(1), f_in->value.dim(2)}, S(1) / (S)n);
        return make_const(std::move(uniform));
    }
    if (f_in->value.dim(0) != p.channels)
        throw ShapeError("route: input has " + std::to_string(f_in->value.dim(0)) +
                         " channels, router expects " + std::to_string(p.channels));
    Var<S> h = f_in;
    if (p.variant != RouterVariant::PM) {
        h = relu(conv2d(h, p.conv1_w, p.conv1_b));
        h = relu(conv2d(h, p.conv2_w, p.conv2_b));
        if (p.variant == RouterVariant::LE_LKC_PM) h = depthwise_conv2d(h, p.lkc_w, p.lkc_b);
        if (p.variant == RouterVariant::LE_SA_PM) h = self_attention_2d(h, p.attn);
    }
    Var<S> logits = conv2d(h, p.proj_w, p.proj_b);  // [N,h,w]
    return softmax_axis(logits, 0);
}

// The N filtered candidates: per mask, scale the magnitude spectrum and
// recombine with the original phase.
template <class S>
std::vector<Var<S>> apply_masks(const Var<S>& f_in, const SpectralBank<S>& bank) {
    if (f_in->value.rank() != 3) throw ShapeError("apply_masks: want [c,h,w]");
    int64_t h = f_in->value.dim(1), w = f_in->value.dim(2);
    if (bank.grid_h != h || bank.grid_wh != half_spectrum_width(w))
        throw ShapeError("apply_masks: bank grid " + std::to_string(bank.grid_h) + "x" +
                         std::to_string(bank.grid_wh) + " does not match feature " +
                         std::to_string(h) + "x" + std::to_string(half_spectrum_width(w)));
    Var<S> spec = rfft2(f_in);
    Var<S> mag = spec_mag(spec);
    Var<S> phase = spec_phase(spec);
    std::vector<Var<S>> out;
    out.reserve(bank.masks.size());
    for (const auto& m : bank.masks)
        out.push_back(irfft2(spec_compose(mul_bcast_hw(mag, m), phase), w));
    return out;
}

// f_out = f_in + sum_i S_i (x) candidate_i, the mix map broadcast across
// channels.
template <class S>
Var<S> lfm_forward(const Var<S>& f_in, const SpectralBank<S>& bank, const RouterParams<S>& p) {
    if (bank.size() != p.n_masks && p.variant != RouterVariant::Fixed)
        throw ShapeError("lfm_forward: bank size != router output channels");
    std::vector<Var<S>> candidates = apply_masks(f_in, bank);
    Var<S> mix = route(f_in, p);
    if (mix->value.dim(0) != (int64_t)candidates.size())
        throw ShapeError("lfm_forward: mix map size mismatch");
    Var<S> mixed;
    for (size_t i = 0; i < candidates.size(); ++i) {
        Var<S> term = mul_bcast_hw(candidates[i], slice_channel(mix, (int64_t)i));
        mixed = mixed ? add(mixed, term) : term;
    }
    return add(f_in, mixed);
}

// Parameter cost of one block: N masks on the half-spectrum grid plus the
// router for the given variant.
inline int64_t lfm_param_count(int64_t channels, int64_t grid_h, int64_t grid_w, int64_t n_masks,
                               RouterVariant v) {
    int64_t wh = grid_w / 2 + 1;
    int64_t bank = n_masks * grid_h * wh;
    if (v == RouterVariant::Fixed) return bank;
    int64_t c = channels;
    int64_t pm = c * n_masks + n_masks;
    int64_t total = bank + pm;
    if (v != RouterVariant::PM) total += 2 * (9 * c * c + c);
    if (v == RouterVariant::LE_LKC_PM) total += c * 7 * 7 + c;
    if (v == RouterVariant::LE_SA_PM) total += 4 * (c * c + c);
    return total;
}

}  // namespace diffdepth
