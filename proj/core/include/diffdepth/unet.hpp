#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "diffdepth/lfm.hpp"
#include "diffdepth/nn.hpp"
#include "diffdepth/rng.hpp"

// Conditional U-Net noise predictor. Three resolutions, one
// [conv-relu-conv-relu] block per resolution per side plus a bottom
// decoder block, skip concatenation at every resolution, stride-2 conv
// downsampling and nearest-neighbor upsampling. The timestep enters each
// block through a learned projection of a sinusoidal embedding. A spectral
// modulation block can be inserted after any main block.

namespace diffdepth {

enum class LfmPlacement {
    None,
    EncoderEarly,
    Middle,
    DecoderEarly,
    DecoderPenultimate,
    DecoderFinal,
    AllBlocks,
};

inline LfmPlacement lfm_placement_from_string(const std::string& s) {
    if (s == "none") return LfmPlacement::None;
    if (s == "encoder-early") return LfmPlacement::EncoderEarly;
    if (s == "middle") return LfmPlacement::Middle;
    if (s == "decoder-early") return LfmPlacement::DecoderEarly;
    if (s == "decoder-penultimate") return LfmPlacement::DecoderPenultimate;
    if (s == "decoder-final") return LfmPlacement::DecoderFinal;
    if (s == "all-blocks") return LfmPlacement::AllBlocks;
    throw ValueError("unknown lfm placement '" + s + "'");
}

inline std::string lfm_placement_to_string(LfmPlacement p) {
    switch (p) {
        case LfmPlacement::None: return "none";
        case LfmPlacement::EncoderEarly: return "encoder-early";
        case LfmPlacement::Middle: return "middle";
        case LfmPlacement::DecoderEarly: return "decoder-early";
        case LfmPlacement::DecoderPenultimate: return "decoder-penultimate";
        case LfmPlacement::DecoderFinal: return "decoder-final";
        default: return "all-blocks";
    }
}

struct UNetConfig {
    int64_t cond_channels = 48;   // image latent channels
    int64_t depth_channels = 16;  // depth latent channels (also output)
    int64_t latent_h = 16, latent_w = 16;
    int64_t base_channels = 32;
    int64_t resolutions = 3;
    int64_t time_embed_dim = 64;
    int heads = 4;
    LfmPlacement placement = LfmPlacement::DecoderPenultimate;
    RouterVariant router = RouterVariant::LE_SA_PM;
    int64_t n_masks = 4;

    int64_t level_channels(int64_t lvl) const {
        return lvl == 0 ? base_channels : base_channels * 2;
    }
};

// The seven main blocks, in forward order.
inline const std::vector<std::string>& unet_block_names() {
    static const std::vector<std::string> names = {"enc0", "enc1", "enc2", "mid",
                                                   "dec2", "dec1", "dec0"};
    return names;
}

// Blocks a placement inserts after.
inline std::vector<std::string> lfm_insertion_points(LfmPlacement p) {
    switch (p) {
        case LfmPlacement::None: return {};
        case LfmPlacement::EncoderEarly: return {"enc0"};
        case LfmPlacement::Middle: return {"mid"};
        case LfmPlacement::DecoderEarly: return {"dec2"};
        case LfmPlacement::DecoderPenultimate: return {"dec1"};
        case LfmPlacement::DecoderFinal: return {"dec0"};
        case LfmPlacement::AllBlocks: return unet_block_names();
    }
    return {};
}

// (channels, grid_h, grid_w) of a block's output feature map.
inline void unet_block_geometry(const UNetConfig& cfg, const std::string& block, int64_t& channels,
                                int64_t& gh, int64_t& gw) {
    if (block == "enc0" || block == "dec0") {
        channels = cfg.level_channels(0);
        gh = cfg.latent_h;
        gw = cfg.latent_w;
    } else if (block == "enc1" || block == "dec1") {
        channels = cfg.level_channels(1);
        gh = cfg.latent_h / 2;
        gw = cfg.latent_w / 2;
    } else {
        channels = cfg.level_channels(2);
        gh = cfg.latent_h / 4;
        gw = cfg.latent_w / 4;
    }
}

// Named learnable tensors with stable registration order.
template <class S>
struct ParamStore {
    std::vector<std::pair<std::string, Var<S>>> items;
    std::unordered_map<std::string, size_t> index;

    Var<S> add(const std::string& name, Tensor<S> init) {
        if (index.count(name)) throw ValueError("ParamStore: duplicate name " + name);
        Var<S> v = make_leaf<S>(std::move(init), true);
        index[name] = items.size();
        items.emplace_back(name, v);
        return v;
    }
    Var<S> get(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw ValueError("ParamStore: missing parameter " + name);
        return items[it->second].second;
    }
    bool has(const std::string& name) const { return index.count(name) != 0; }
    int64_t total_elements() const {
        int64_t n = 0;
        for (auto& [_, v] : items) n += v->value.numel();
        return n;
    }
    void zero_grads() {
        for (auto& [_, v] : items) zero_grad(v);
    }
};

namespace initdetail {

// Every tensor is initialized from a stream keyed by its own name, so
// shared layers get identical values across configs that differ only in
// extra modules.
template <class S>
Tensor<S> he_normal(const Shape& shp, int64_t fan_in, uint64_t seed, const std::string& name) {
    Rng rng = Rng(seed).stream("init").stream(name);
    Tensor<S> t(shp);
    double std = std::sqrt(2.0 / (double)fan_in);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = (S)(rng.normal() * std);
    return t;
}

template <class S>
Tensor<S> xavier_normal(const Shape& shp, int64_t fan_in, int64_t fan_out, uint64_t seed,
                        const std::string& name) {
    Rng rng = Rng(seed).stream("init").stream(name);
    Tensor<S> t(shp);
    double std = std::sqrt(2.0 / (double)(fan_in + fan_out));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = (S)(rng.normal() * std);
    return t;
}

}  // namespace initdetail

template <class S>
struct UNetParams {
    ParamStore<S> store;
    UNetConfig cfg;

    Var<S> operator()(const std::string& name) const { return store.get(name); }
};

namespace unetdetail {

// Feature gain: relu networks are positively homogeneous, so scaling the
// stem scales every activation, and larger activations mean larger
// functional steps per unit weight change. This is what makes the small
// fine-tuning learning rate productive from scratch. The head is damped by
// the same factor so the initial prediction stays near zero.
constexpr double kFeatureGain = 96.0;

template <class S>
void add_conv(ParamStore<S>& ps, const std::string& name, int64_t co, int64_t ci, int64_t k,
              uint64_t seed, double scale = 1.0) {
    Shape wshape{co, ci, k, k};
    Tensor<S> w = initdetail::he_normal<S>(wshape, ci * k * k, seed, name + ".w");
    if (scale != 1.0)
        for (auto& v : w.data) v = (S)(v * (S)scale);
    ps.add(name + ".w", std::move(w));
    ps.add(name + ".b", Tensor<S>::zeros({co}));
}

template <class S>
void add_linear(ParamStore<S>& ps, const std::string& name, int64_t in, int64_t out,
                uint64_t seed) {
    ps.add(name + ".w", initdetail::xavier_normal<S>({in, out}, in, out, seed, name + ".w"));
    ps.add(name + ".b", Tensor<S>::zeros({out}));
}

// block = conv3x3, relu, +time, conv3x3, relu
template <class S>
void add_block(ParamStore<S>& ps, const std::string& name, int64_t ci, int64_t co,
               int64_t time_dim, uint64_t seed) {
    add_conv(ps, name + ".conv1", co, ci, 3, seed);
    add_conv(ps, name + ".conv2", co, co, 3, seed);
    add_linear(ps, name + ".time", time_dim, co, seed);
}

template <class S>
void add_lfm(ParamStore<S>& ps, const UNetConfig& cfg, const std::string& block, uint64_t seed) {
    int64_t c, gh, gw;
    unet_block_geometry(cfg, block, c, gh, gw);
    std::string base = "lfm." + block;
    for (int64_t i = 0; i < cfg.n_masks; ++i)
        ps.add(base + ".mask" + std::to_string(i),
               Tensor<S>::full({gh, half_spectrum_width(gw)}, S(1)));
    if (cfg.router == RouterVariant::Fixed) return;
    if (cfg.router == RouterVariant::PM) {
        // the single projection is the router's first layer: counter the
        // feature gain so the softmax starts unsaturated
        add_conv(ps, base + ".router.proj", cfg.n_masks, c, 1, seed, 1.0 / kFeatureGain);
        return;
    }
    add_conv(ps, base + ".router.conv1", c, c, 3, seed, 1.0 / kFeatureGain);
    add_conv(ps, base + ".router.conv2", c, c, 3, seed);
    if (cfg.router == RouterVariant::LE_LKC_PM) {
        ps.add(base + ".router.lkc.w",
               initdetail::he_normal<S>({c, 7, 7}, 49, seed, base + ".router.lkc.w"));
        ps.add(base + ".router.lkc.b", Tensor<S>::zeros({c}));
    }
    if (cfg.router == RouterVariant::LE_SA_PM) {
        for (const char* nm : {"wq", "wk", "wv", "wo"}) {
            std::string pn = base + ".router.attn." + nm;
            ps.add(pn, initdetail::xavier_normal<S>({c, c}, c, c, seed, pn));
            ps.add(base + ".router.attn.b" + std::string(1, nm[1]), Tensor<S>::zeros({c}));
        }
    }
    add_conv(ps, base + ".router.proj", cfg.n_masks, c, 1, seed);
}

template <class S>
SpectralBank<S> bank_at(const UNetParams<S>& p, const std::string& block) {
    int64_t c, gh, gw;
    unet_block_geometry(p.cfg, block, c, gh, gw);
    SpectralBank<S> bank;
    bank.grid_h = gh;
    bank.grid_wh = half_spectrum_width(gw);
    for (int64_t i = 0; i < p.cfg.n_masks; ++i)
        bank.masks.push_back(p("lfm." + block + ".mask" + std::to_string(i)));
    return bank;
}

template <class S>
RouterParams<S> router_at(const UNetParams<S>& p, const std::string& block) {
    int64_t c, gh, gw;
    unet_block_geometry(p.cfg, block, c, gh, gw);
    RouterParams<S> r;
    r.variant = p.cfg.router;
    r.channels = c;
    r.n_masks = p.cfg.n_masks;
    if (r.variant == RouterVariant::Fixed) return r;
    std::string base = "lfm." + block;
    if (r.variant != RouterVariant::PM) {
        r.conv1_w = p(base + ".router.conv1.w");
        r.conv1_b = p(base + ".router.conv1.b");
        r.conv2_w = p(base + ".router.conv2.w");
        r.conv2_b = p(base + ".router.conv2.b");
        if (r.variant == RouterVariant::LE_LKC_PM) {
            r.lkc_w = p(base + ".router.lkc.w");
            r.lkc_b = p(base + ".router.lkc.b");
        }
        if (r.variant == RouterVariant::LE_SA_PM) {
            r.attn.heads = p.cfg.heads;
            r.attn.wq = p(base + ".router.attn.wq");
            r.attn.bq = p(base + ".router.attn.bq");
            r.attn.wk = p(base + ".router.attn.wk");
            r.attn.bk = p(base + ".router.attn.bk");
            r.attn.wv = p(base + ".router.attn.wv");
            r.attn.bv = p(base + ".router.attn.bv");
            r.attn.wo = p(base + ".router.attn.wo");
            r.attn.bo = p(base + ".router.attn.bo");
        }
    }
    r.proj_w = p(base + ".router.proj.w");
    r.proj_b = p(base + ".router.proj.b");
    return r;
}

}  // namespace unetdetail

template <class S>
UNetParams<S> init_unet_params(const UNetConfig& cfg, uint64_t seed) {
    if (cfg.resolutions != 3) throw ValueError("init_unet_params: only 3 resolutions supported");
    if (cfg.latent_h % 4 || cfg.latent_w % 4)
        throw ShapeError("init_unet_params: latent extents must be divisible by 4");
    UNetParams<S> p;
    p.cfg = cfg;
    ParamStore<S>& ps = p.store;
    int64_t c0 = cfg.level_channels(0), c1 = cfg.level_channels(1), c2 = cfg.level_channels(2);
    int64_t td = cfg.time_embed_dim;
    using namespace unetdetail;
    add_conv(ps, "stem", c0, cfg.cond_channels + cfg.depth_channels, 3, seed, kFeatureGain);
    add_block(ps, "enc0", c0, c0, td, seed);
    add_conv(ps, "down0", c1, c0, 3, seed);  // stride 2
    add_block(ps, "enc1", c1, c1, td, seed);
    add_conv(ps, "down1", c2, c1, 3, seed);  // stride 2
    add_block(ps, "enc2", c2, c2, td, seed);
    add_block(ps, "mid", c2, c2, td, seed);
    add_block(ps, "dec2", c2 + c2, c2, td, seed);
    add_conv(ps, "up1", c1, c2, 3, seed);
    add_block(ps, "dec1", c1 + c1, c1, td, seed);
    add_conv(ps, "up0", c0, c1, 3, seed);
    add_block(ps, "dec0", c0 + c0, c0, td, seed);
    // the head sees the decoder features plus the gain-scaled raw inputs
    add_conv(ps, "head", cfg.depth_channels, c0 + cfg.cond_channels + cfg.depth_channels, 3, seed,
             /*scale=*/0.2 / kFeatureGain);
    for (const auto& block : lfm_insertion_points(cfg.placement)) add_lfm(ps, cfg, block, seed);
    return p;
}

namespace unetdetail {

template <class S>
Var<S> run_block(const UNetParams<S>& p, const std::string& name, const Var<S>& x,
                 const Var<S>& emb) {
    Var<S> h = relu(conv2d(x, p(name + ".conv1.w"), p(name + ".conv1.b")));
    Var<S> tproj = linear(emb, p(name + ".time.w"), p(name + ".time.b"));
    h = add_bias_channels(h, reshape(tproj, {tproj->value.dim(1)}));
    h = relu(conv2d(h, p(name + ".conv2.w"), p(name + ".conv2.b")));
    return h;
}

template <class S>
Var<S> maybe_lfm(const UNetParams<S>& p, const std::string& block, const Var<S>& x,
                 const std::vector<std::string>& points) {
    for (const auto& b : points)
        if (b == block) {
            SpectralBank<S> bank = bank_at(p, block);
            RouterParams<S> router = router_at(p, block);
            return lfm_forward(x, bank, router);
        }
    return x;
}

}  // namespace unetdetail

// eps_hat = f(z_t, z_cond, t). Output shape equals z_t's shape.
template <class S>
Var<S> predict_noise(const Var<S>& z_t, const Var<S>& z_cond, int64_t t, const UNetParams<S>& p) {
    const UNetConfig& cfg = p.cfg;
    if (z_t->value.rank() != 3 || z_cond->value.rank() != 3 ||
        z_t->value.dim(1) != z_cond->value.dim(1) || z_t->value.dim(2) != z_cond->value.dim(2))
        throw ShapeError("predict_noise: latents must share spatial dims");
    if (z_t->value.dim(0) != cfg.depth_channels || z_cond->value.dim(0) != cfg.cond_channels)
        throw ShapeError("predict_noise: channel counts do not match config");
    using namespace unetdetail;
    std::vector<std::string> points = lfm_insertion_points(cfg.placement);
    Var<S> emb = make_const(timestep_embedding<S>(t, cfg.time_embed_dim));

    Var<S> x = conv2d(concat_channels(z_t, z_cond), p("stem.w"), p("stem.b"));
    Var<S> e0 = maybe_lfm(p, "enc0", run_block(p, "enc0", x, emb), points);
    Var<S> x1 = conv2d(e0, p("down0.w"), p("down0.b"), /*stride=*/2);
    Var<S> e1 = maybe_lfm(p, "enc1", run_block(p, "enc1", x1, emb), points);
    Var<S> x2 = conv2d(e1, p("down1.w"), p("down1.b"), /*stride=*/2);
    Var<S> e2 = maybe_lfm(p, "enc2", run_block(p, "enc2", x2, emb), points);
    Var<S> m = maybe_lfm(p, "mid", run_block(p, "mid", e2, emb), points);
    Var<S> d2 = maybe_lfm(p, "dec2", run_block(p, "dec2", concat_channels(m, e2), emb), points);
    Var<S> u1 = conv2d(upsample_nearest(d2, 2), p("up1.w"), p("up1.b"));
    Var<S> d1 = maybe_lfm(p, "dec1", run_block(p, "dec1", concat_channels(u1, e1), emb), points);
    Var<S> u0 = conv2d(upsample_nearest(d1, 2), p("up0.w"), p("up0.b"));
    Var<S> d0 = maybe_lfm(p, "dec0", run_block(p, "dec0", concat_channels(u0, e0), emb), points);
    Var<S> head_in = concat_channels(
        d0, mul_scalar(concat_channels(z_t, z_cond), unetdetail::kFeatureGain));
    return conv2d(head_in, p("head.w"), p("head.b"));
}

// Duplicate a first-layer convolution along the input-channel axis and
// halve it, so the adapted layer applied to (u, u) reproduces the original
// layer applied to u exactly.
template <class S>
Tensor<S> adapt_input_layer(const Tensor<S>& w) {
    if (w.rank() != 4) throw ShapeError("adapt_input_layer: want [co,ci,kh,kw]");
    int64_t co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    Tensor<S> out({co, 2 * ci, kh, kw});
    for (int64_t oc = 0; oc < co; ++oc)
        for (int64_t ic = 0; ic < ci; ++ic)
            for (int64_t i = 0; i < kh * kw; ++i) {
                S half = w.data[(size_t)(((oc * ci + ic) * kh * kw) + i)] / S(2);
                out.data[(size_t)(((oc * 2 * ci + ic) * kh * kw) + i)] = half;
                out.data[(size_t)(((oc * 2 * ci + ci + ic) * kh * kw) + i)] = half;
            }
    return out;
}

// Analytic parameter cost of the spectral-modulation blocks for a config.
inline int64_t unet_lfm_param_count(const UNetConfig& cfg) {
    int64_t total = 0;
    for (const auto& block : lfm_insertion_points(cfg.placement)) {
        int64_t c, gh, gw;
        unet_block_geometry(cfg, block, c, gh, gw);
        total += lfm_param_count(c, gh, gw, cfg.n_masks, cfg.router);
    }
    return total;
}

}  // namespace diffdepth
