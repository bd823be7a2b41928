#pragma once

#include <cmath>

#include "diffdepth/graph.hpp"
#include "diffdepth/parallel.hpp"

// Differentiable primitives. Forward values are computed eagerly; each op
// installs a closure that scatters the output gradient into its parents.
// Inner loops run over the contiguous last axis so the compiler can
// vectorize them; parallel chunks write disjoint output ranges, keeping
// results bit-identical for any thread count.

namespace diffdepth {

namespace detail {

template <class S>
void accum(Node<S>& parent, const Tensor<S>& g) {
    if (!parent.requires_grad) return;
    Tensor<S>& buf = parent.grad_buf();
    for (int64_t i = 0; i < g.numel(); ++i) buf[i] += g[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a->value, b->value, "add");
    Tensor<S> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
    return detail::make_op<S>("add", std::move(out), {a, b}, [ap = a.get(), bp = b.get()](Node<S>& self) {
        detail::accum(*ap, self.grad);
        detail::accum(*bp, self.grad);
    });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a->value, b->value, "sub");
    Tensor<S> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
    return detail::make_op<S>("sub", std::move(out), {a, b}, [ap = a.get(), bp = b.get()](Node<S>& self) {
        detail::accum(*ap, self.grad);
        if (bp->requires_grad) {
            Tensor<S>& buf = bp->grad_buf();
            for (int64_t i = 0; i < self.grad.numel(); ++i) buf[i] -= self.grad[i];
        }
    });
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a->value, b->value, "mul");
    Tensor<S> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    return detail::make_op<S>("mul", std::move(out), {a, b}, [ap = a.get(), bp = b.get()](Node<S>& self) {
        if (ap->requires_grad) {
            Tensor<S>& buf = ap->grad_buf();
            for (int64_t i = 0; i < self.grad.numel(); ++i) buf[i] += self.grad[i] * bp->value[i];
        }
        if (bp->requires_grad) {
            Tensor<S>& buf = bp->grad_buf();
            for (int64_t i = 0; i < self.grad.numel(); ++i) buf[i] += self.grad[i] * ap->value[i];
        }
    });
}

template <class S>
Var<S> add_scalar(const Var<S>& x, double c) {
    Tensor<S> out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = x->value[i] + (S)c;
    return detail::make_op<S>("add_scalar", std::move(out), {x},
                              [xp = x.get()](Node<S>& self) { detail::accum(*xp, self.grad); });
}

template <class S>
Var<S> mul_scalar(const Var<S>& x, double c) {
    Tensor<S> out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = x->value[i] * (S)c;
    return detail::make_op<S>("mul_scalar", std::move(out), {x}, [xp = x.get(), c](Node<S>& self) {
        if (!xp->requires_grad) return;
        Tensor<S>& buf = xp->grad_buf();
        for (int64_t i = 0; i < self.grad.numel(); ++i) buf[i] += (S)c * self.grad[i];
    });
}

// x - s, with s a scalar node broadcast over all of x.
template <class S>
Var<S> sub_bcast_scalar(const Var<S>& x, const Var<S>& s) {
    if (s->value.numel() != 1) throw ShapeError("sub_bcast_scalar: s must be scalar");
    Tensor<S> out(x->value.shape);
    S sv = s->value[0];
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = x->value[i] - sv;
    return detail::make_op<S>("sub_bcast_scalar", std::move(out), {x, s},
                              [xp = x.get(), sp = s.get()](Node<S>& self) {
                                  detail::accum(*xp, self.grad);
                                  if (sp->requires_grad) {
                                      S acc = 0;
                                      for (int64_t i = 0; i < self.grad.numel(); ++i) acc += self.grad[i];
                                      sp->grad_buf()[0] -= acc;
                                  }
                              });
}

// x / s, with s a scalar node broadcast over all of x.
template <class S>
Var<S> div_bcast_scalar(const Var<S>& x, const Var<S>& s) {
    if (s->value.numel() != 1) throw ShapeError("div_bcast_scalar: s must be scalar");
    Tensor<S> out(x->value.shape);
    S sv = s->value[0];
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = x->value[i] / sv;
    return detail::make_op<S>("div_bcast_scalar", std::move(out), {x, s},
                              [xp = x.get(), sp = s.get()](Node<S>& self) {
                                  S sv2 = sp->value[0];
                                  if (xp->requires_grad) {
                                      Tensor<S>& buf = xp->grad_buf();
                                      for (int64_t i = 0; i < self.grad.numel(); ++i)
                                          buf[i] += self.grad[i] / sv2;
                                  }
                                  if (sp->requires_grad) {
                                      S acc = 0;
                                      for (int64_t i = 0; i < self.grad.numel(); ++i)
                                          acc += self.grad[i] * self.value[i];
                                      sp->grad_buf()[0] -= acc / sv2;
                                  }
                              });
}

template <class S>
Var<S> relu(const Var<S>& x) {
    Tensor<S> out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = x->value[i] > S(0) ? x->value[i] : S(0);
    return detail::make_op<S>("relu", std::move(out), {x}, [xp = x.get()](Node<S>& self) {
        if (!xp->requires_grad) return;
        Tensor<S>& buf = xp->grad_buf();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            if (xp->value[i] > S(0)) buf[i] += self.grad[i];
    });
}

template <class S>
Var<S> sigmoid(const Var<S>& x) {
    Tensor<S> out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = S(1) / (S(1) + std::exp(-x->value[i]));
    return detail::make_op<S>("sigmoid", std::move(out), {x}, [xp = x.get()](Node<S>& self) {
        if (!xp->requires_grad) return;
        Tensor<S>& buf = xp->grad_buf();
        for (int64_t i = 0; i < self.grad.numel(); ++i) {
            S y = self.value[i];
            buf[i] += self.grad[i] * y * (S(1) - y);
        }
    });
}

// ---------------------------------------------------------------------------
// reductions and concatenation
// ---------------------------------------------------------------------------

template <class S>
Var<S> sum_all(const Var<S>& x) {
    S acc = 0;
    for (int64_t i = 0; i < x->value.numel(); ++i) acc += x->value[i];
    return detail::make_op<S>("sum_all", Tensor<S>::scalar(acc), {x}, [xp = x.get()](Node<S>& self) {
        if (!xp->requires_grad) return;
        Tensor<S>& buf = xp->grad_buf();
        S g = self.grad[0];
        for (int64_t i = 0; i < buf.numel(); ++i) buf[i] += g;
    });
}

template <class S>
Var<S> mean_all(const Var<S>& x) {
    S acc = 0;
    int64_t n = x->value.numel();
    for (int64_t i = 0; i < n; ++i) acc += x->value[i];
    return detail::make_op<S>("mean_all", Tensor<S>::scalar(acc / (S)n), {x},
                              [xp = x.get(), n](Node<S>& self) {
                                  if (!xp->requires_grad) return;
                                  Tensor<S>& buf = xp->grad_buf();
                                  S g = self.grad[0] / (S)n;
                                  for (int64_t i = 0; i < n; ++i) buf[i] += g;
                              });
}

// Flattens every input and concatenates them into one 1-D tensor.
template <class S>
Var<S> concat_flat(const std::vector<Var<S>>& xs) {
    if (xs.empty()) throw ValueError("concat_flat: empty input list");
    int64_t total = 0;
    for (auto& x : xs) total += x->value.numel();
    Tensor<S> out({total});
    int64_t off = 0;
    for (auto& x : xs) {
        std::copy(x->value.data.begin(), x->value.data.end(), out.data.begin() + off);
        off += x->value.numel();
    }
    std::vector<Var<S>> parents = xs;
    return detail::make_op<S>("concat_flat", std::move(out), std::move(parents), [](Node<S>& self) {
        int64_t off2 = 0;
        for (auto& p : self.parents) {
            int64_t n = p->value.numel();
            if (p->requires_grad) {
                Tensor<S>& buf = p->grad_buf();
                for (int64_t i = 0; i < n; ++i) buf[i] += self.grad[off2 + i];
            }
            off2 += n;
        }
    });
}

// ---------------------------------------------------------------------------
// broadcast helpers for [c,h,w] feature maps
// ---------------------------------------------------------------------------

// x[c,h,w] * m[h,w], the map broadcast across channels. Also used for
// half-spectrum magnitudes [c,h,wh] * mask[h,wh].
template <class S>
Var<S> mul_bcast_hw(const Var<S>& x, const Var<S>& m) {
    if (x->value.rank() != 3 || m->value.rank() != 2 || x->value.dim(1) != m->value.dim(0) ||
        x->value.dim(2) != m->value.dim(1))
        throw ShapeError("mul_bcast_hw: want x[c,h,w], m[h,w], got " + shape_str(x->value.shape) +
                         " and " + shape_str(m->value.shape));
    int64_t c = x->value.dim(0), hw = m->value.numel();
    Tensor<S> out(x->value.shape);
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < hw; ++i) out[ch * hw + i] = x->value[ch * hw + i] * m->value[i];
    return detail::make_op<S>("mul_bcast_hw", std::move(out), {x, m},
                              [xp = x.get(), mp = m.get(), c, hw](Node<S>& self) {
                                  if (xp->requires_grad) {
                                      Tensor<S>& buf = xp->grad_buf();
                                      for (int64_t ch = 0; ch < c; ++ch)
                                          for (int64_t i = 0; i < hw; ++i)
                                              buf[ch * hw + i] += self.grad[ch * hw + i] * mp->value[i];
                                  }
                                  if (mp->requires_grad) {
                                      Tensor<S>& buf = mp->grad_buf();
                                      for (int64_t ch = 0; ch < c; ++ch)
                                          for (int64_t i = 0; i < hw; ++i)
                                              buf[i] += self.grad[ch * hw + i] * xp->value[ch * hw + i];
                                  }
                              });
}

// x[c,h,w] + b[c] broadcast over the spatial plane.
template <class S>
Var<S> add_bias_channels(const Var<S>& x, const Var<S>& b) {
    if (x->value.rank() != 3 || b->value.rank() != 1 || b->value.dim(0) != x->value.dim(0))
        throw ShapeError("add_bias_channels: want x[c,h,w], b[c]");
    int64_t c = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
    Tensor<S> out(x->value.shape);
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < hw; ++i) out[ch * hw + i] = x->value[ch * hw + i] + b->value[ch];
    return detail::make_op<S>("add_bias_channels", std::move(out), {x, b},
                              [xp = x.get(), bp = b.get(), c, hw](Node<S>& self) {
                                  detail::accum(*xp, self.grad);
                                  if (bp->requires_grad) {
                                      Tensor<S>& buf = bp->grad_buf();
                                      for (int64_t ch = 0; ch < c; ++ch) {
                                          S acc = 0;
                                          for (int64_t i = 0; i < hw; ++i) acc += self.grad[ch * hw + i];
                                          buf[ch] += acc;
                                      }
                                  }
                              });
}

// ---------------------------------------------------------------------------
// convolution, pooling, resampling
// ---------------------------------------------------------------------------

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

// Output-index range [lo, hi) for which in-index = o*stride + k - pad stays
// inside [0, in_extent).
inline void conv_valid_range(int64_t out_extent, int64_t in_extent, int64_t k, int64_t stride,
                             int64_t pad, int64_t& lo, int64_t& hi) {
    int64_t num_lo = pad - k;
    lo = num_lo <= 0 ? 0 : (num_lo + stride - 1) / stride;
    int64_t num_hi = in_extent + pad - k;  // exclusive bound on o*stride
    hi = num_hi <= 0 ? 0 : std::min(out_extent, (num_hi + stride - 1) / stride);
    if (lo > hi) lo = hi;
}

// Patch matrix for GEMM-based convolution: row (icn*kh + ky)*kw + kx holds
// the padded input samples feeding each output position.
template <class S>
void im2col(const S* x, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t oh, int64_t ow, S* patches) {
    for (int64_t icn = 0; icn < ci; ++icn) {
        const S* xplane = x + icn * h * w;
        for (int64_t ky = 0; ky < kh; ++ky) {
            int64_t oy_lo, oy_hi;
            conv_valid_range(oh, h, ky, stride, pad, oy_lo, oy_hi);
            for (int64_t kx = 0; kx < kw; ++kx) {
                S* row = patches + (((icn * kh + ky) * kw) + kx) * oh * ow;
                std::fill(row, row + oh * ow, S(0));
                int64_t ox_lo, ox_hi;
                conv_valid_range(ow, w, kx, stride, pad, ox_lo, ox_hi);
                int64_t n = ox_hi - ox_lo;
                for (int64_t oy = oy_lo; oy < oy_hi; ++oy) {
                    const S* src = xplane + (oy * stride + ky - pad) * w + ox_lo * stride + kx - pad;
                    S* dst = row + oy * ow + ox_lo;
                    if (stride == 1) {
                        std::copy(src, src + n, dst);
                    } else {
                        for (int64_t i = 0; i < n; ++i) dst[i] = src[i * stride];
                    }
                }
            }
        }
    }
}

// Scatter-add the patch-space gradient back onto the input gradient.
template <class S>
void col2im_add(const S* patches, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t oh, int64_t ow, S* dx) {
    parallel_for(ci, [&](int64_t i0, int64_t i1) {
        for (int64_t icn = i0; icn < i1; ++icn) {
            S* dxplane = dx + icn * h * w;
            for (int64_t ky = 0; ky < kh; ++ky) {
                int64_t oy_lo, oy_hi;
                conv_valid_range(oh, h, ky, stride, pad, oy_lo, oy_hi);
                for (int64_t kx = 0; kx < kw; ++kx) {
                    const S* row = patches + (((icn * kh + ky) * kw) + kx) * oh * ow;
                    int64_t ox_lo, ox_hi;
                    conv_valid_range(ow, w, kx, stride, pad, ox_lo, ox_hi);
                    int64_t n = ox_hi - ox_lo;
                    for (int64_t oy = oy_lo; oy < oy_hi; ++oy) {
                        const S* src = row + oy * ow + ox_lo;
                        S* dst = dxplane + (oy * stride + ky - pad) * w + ox_lo * stride + kx - pad;
                        if (stride == 1) {
                            for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
                        } else {
                            for (int64_t i = 0; i < n; ++i) dst[i * stride] += src[i];
                        }
                    }
                }
            }
        }
    });
}

// C[m,n] += A[m,k] * B[k,n], rows of C split across workers.
template <class S>
void gemm_accum(const S* A, const S* B, S* C, int64_t m, int64_t k, int64_t n) {
    parallel_for(m, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            S* crow = C + i * n;
            const S* arow = A + i * k;
            for (int64_t l = 0; l < k; ++l) {
                S a = arow[l];
                if (a == S(0)) continue;
                const S* brow = B + l * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
            }
        }
    });
}

// C[m,n] += A[k,m]^T * B[k,n]
template <class S>
void gemm_accum_at(const S* A, const S* B, S* C, int64_t m, int64_t k, int64_t n) {
    parallel_for(m, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            S* crow = C + i * n;
            for (int64_t l = 0; l < k; ++l) {
                S a = A[l * m + i];
                if (a == S(0)) continue;
                const S* brow = B + l * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
            }
        }
    });
}

// Dot product with 16 fixed-order partial sums: bit-deterministic and
// vectorizable without reassociation of a single chain.
template <class S>
S dot_lanes(const S* a, const S* b, int64_t n) {
    constexpr int64_t L = 16;
    S part[L] = {};
    int64_t n16 = n - n % L;
    for (int64_t l = 0; l < n16; l += L)
        for (int64_t j = 0; j < L; ++j) part[j] += a[l + j] * b[l + j];
    for (int64_t l = n16; l < n; ++l) part[l - n16] += a[l] * b[l];
    S acc = 0;
    for (int64_t j = 0; j < L; ++j) acc += part[j];
    return acc;
}

// C[m,n] += A[m,k] * B[n,k]^T (dot products over the shared k axis)
template <class S>
void gemm_accum_bt(const S* A, const S* B, S* C, int64_t m, int64_t k, int64_t n) {
    parallel_for(m, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            const S* arow = A + i * k;
            S* crow = C + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += dot_lanes(arow, B + j * k, k);
        }
    });
}

}  // namespace detail

// Zero-padded 2D convolution, x[ci,h,w] * w[co,ci,kh,kw] (+ optional b[co]).
template <class S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int64_t stride = 1,
              int64_t pad = -1) {
    const Tensor<S>&xv = x->value, &wv = w->value;
    if (xv.rank() != 3 || wv.rank() != 4) throw ShapeError("conv2d: want x[ci,h,w], w[co,ci,kh,kw]");
    if (xv.dim(0) != wv.dim(1))
        throw ShapeError("conv2d: input channels " + std::to_string(xv.dim(0)) +
                         " != weight channels " + std::to_string(wv.dim(1)));
    int64_t ci = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
    int64_t co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (pad < 0) pad = kh / 2;  // same padding for odd kernels at stride 1
    if (b && (b->value.rank() != 1 || b->value.dim(0) != co))
        throw ShapeError("conv2d: bias must be [co]");
    int64_t oh = conv_out_extent(h, kh, stride, pad), ow = conv_out_extent(wd, kw, stride, pad);
    if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: empty output");

    Tensor<S> out({co, oh, ow});
    int64_t ohw = oh * ow, k2 = ci * kh * kw;
    {
        std::vector<S> patches((size_t)(k2 * ohw));
        detail::im2col(xv.ptr(), ci, h, wd, kh, kw, stride, pad, oh, ow, patches.data());
        S* od = out.ptr();
        for (int64_t oc = 0; oc < co; ++oc) {
            S bias = b ? b->value[oc] : S(0);
            std::fill(od + oc * ohw, od + (oc + 1) * ohw, bias);
        }
        detail::gemm_accum(wv.ptr(), patches.data(), od, co, k2, ohw);
    }

    std::vector<Var<S>> parents = b ? std::vector<Var<S>>{x, w, b} : std::vector<Var<S>>{x, w};
    Node<S>* bp = b ? b.get() : nullptr;
    return detail::make_op<S>(
        "conv2d", std::move(out), std::move(parents),
        [xp = x.get(), wp = w.get(), bp, ci, h, wd, co, kh, kw, oh, ow, stride, pad](Node<S>& self) {
            const S* g = self.grad.ptr();
            int64_t ohw = oh * ow, k2 = ci * kh * kw;
            if (xp->requires_grad || wp->requires_grad) {
                std::vector<S> patches;
                if (wp->requires_grad) {
                    patches.resize((size_t)(k2 * ohw));
                    detail::im2col(xp->value.ptr(), ci, h, wd, kh, kw, stride, pad, oh, ow,
                                   patches.data());
                    detail::gemm_accum_bt(g, patches.data(), wp->grad_buf().ptr(), co, ohw, k2);
                }
                if (xp->requires_grad) {
                    std::vector<S> q((size_t)(k2 * ohw), S(0));
                    detail::gemm_accum_at(wp->value.ptr(), g, q.data(), k2, co, ohw);
                    detail::col2im_add(q.data(), ci, h, wd, kh, kw, stride, pad, oh, ow,
                                       xp->grad_buf().ptr());
                }
            }
            if (bp && bp->requires_grad) {
                Tensor<S>& db = bp->grad_buf();
                for (int64_t oc = 0; oc < co; ++oc) {
                    S acc = 0;
                    const S* gplane = g + oc * oh * ow;
                    for (int64_t i = 0; i < oh * ow; ++i) acc += gplane[i];
                    db[oc] += acc;
                }
            }
        });
}

// Depthwise (per-channel) zero-padded convolution, x[c,h,w] * w[c,kh,kw] + b[c].
template <class S>
Var<S> depthwise_conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
    const Tensor<S>&xv = x->value, &wv = w->value;
    if (xv.rank() != 3 || wv.rank() != 3 || xv.dim(0) != wv.dim(0))
        throw ShapeError("depthwise_conv2d: want x[c,h,w], w[c,kh,kw]");
    int64_t c = xv.dim(0), h = xv.dim(1), wd = xv.dim(2), kh = wv.dim(1), kw = wv.dim(2);
    int64_t pad = kh / 2;
    Tensor<S> out({c, h, wd});
    for (int64_t ch = 0; ch < c; ++ch) {
        S bias = b ? b->value[ch] : S(0);
        for (int64_t oy = 0; oy < h; ++oy)
            for (int64_t ox = 0; ox < wd; ++ox) {
                S acc = bias;
                for (int64_t ky = 0; ky < kh; ++ky) {
                    int64_t iy = oy + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int64_t kx = 0; kx < kw; ++kx) {
                        int64_t ix = ox + kx - pad;
                        if (ix < 0 || ix >= wd) continue;
                        acc += wv.at(ch, ky, kx) * xv.at(ch, iy, ix);
                    }
                }
                out.at(ch, oy, ox) = acc;
            }
    }
    std::vector<Var<S>> parents = b ? std::vector<Var<S>>{x, w, b} : std::vector<Var<S>>{x, w};
    Node<S>* bp = b ? b.get() : nullptr;
    return detail::make_op<S>(
        "depthwise_conv2d", std::move(out), std::move(parents),
        [xp = x.get(), wp = w.get(), bp, c, h, wd, kh, kw, pad](Node<S>& self) {
            for (int64_t ch = 0; ch < c; ++ch)
                for (int64_t oy = 0; oy < h; ++oy)
                    for (int64_t ox = 0; ox < wd; ++ox) {
                        S g = self.grad.at(ch, oy, ox);
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            int64_t iy = oy + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                int64_t ix = ox + kx - pad;
                                if (ix < 0 || ix >= wd) continue;
                                if (xp->requires_grad)
                                    xp->grad_buf().at(ch, iy, ix) += wp->value.at(ch, ky, kx) * g;
                                if (wp->requires_grad)
                                    wp->grad_buf().at(ch, ky, kx) += xp->value.at(ch, iy, ix) * g;
                            }
                        }
                        if (bp && bp->requires_grad) bp->grad_buf()[ch] += g;
                    }
        });
}

template <class S>
Var<S> avg_pool2d(const Var<S>& x, int64_t f) {
    const Tensor<S>& xv = x->value;
    if (xv.rank() != 3) throw ShapeError("avg_pool2d: want [c,h,w]");
    if (f < 1 || xv.dim(1) % f || xv.dim(2) % f)
        throw ShapeError("avg_pool2d: extents not divisible by factor " + std::to_string(f));
    int64_t c = xv.dim(0), oh = xv.dim(1) / f, ow = xv.dim(2) / f;
    Tensor<S> out({c, oh, ow});
    S inv = S(1) / (S)(f * f);
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
                S acc = 0;
                for (int64_t dy = 0; dy < f; ++dy)
                    for (int64_t dx = 0; dx < f; ++dx) acc += xv.at(ch, oy * f + dy, ox * f + dx);
                out.at(ch, oy, ox) = acc * inv;
            }
    return detail::make_op<S>("avg_pool2d", std::move(out), {x},
                              [xp = x.get(), c, oh, ow, f, inv](Node<S>& self) {
                                  if (!xp->requires_grad) return;
                                  Tensor<S>& buf = xp->grad_buf();
                                  for (int64_t ch = 0; ch < c; ++ch)
                                      for (int64_t oy = 0; oy < oh; ++oy)
                                          for (int64_t ox = 0; ox < ow; ++ox) {
                                              S g = self.grad.at(ch, oy, ox) * inv;
                                              for (int64_t dy = 0; dy < f; ++dy)
                                                  for (int64_t dx = 0; dx < f; ++dx)
                                                      buf.at(ch, oy * f + dy, ox * f + dx) += g;
                                          }
                              });
}

template <class S>
Var<S> max_pool2d(const Var<S>& x, int64_t f) {
    const Tensor<S>& xv = x->value;
    if (xv.rank() != 3) throw ShapeError("max_pool2d: want [c,h,w]");
    if (f < 1 || xv.dim(1) % f || xv.dim(2) % f)
        throw ShapeError("max_pool2d: extents not divisible by factor " + std::to_string(f));
    int64_t c = xv.dim(0), oh = xv.dim(1) / f, ow = xv.dim(2) / f;
    Tensor<S> out({c, oh, ow});
    std::vector<int64_t> argmax((size_t)(c * oh * ow));
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
                S best{};
                int64_t best_idx = -1;
                for (int64_t dy = 0; dy < f; ++dy)
                    for (int64_t dx = 0; dx < f; ++dx) {
                        int64_t iy = oy * f + dy, ix = ox * f + dx;
                        S v = xv.at(ch, iy, ix);
                        if (best_idx < 0 || v > best) {
                            best = v;
                            best_idx = (ch * xv.dim(1) + iy) * xv.dim(2) + ix;
                        }
                    }
                out.at(ch, oy, ox) = best;
                argmax[(size_t)((ch * oh + oy) * ow + ox)] = best_idx;
            }
    return detail::make_op<S>("max_pool2d", std::move(out), {x},
                              [xp = x.get(), am = std::move(argmax)](Node<S>& self) {
                                  if (!xp->requires_grad) return;
                                  Tensor<S>& buf = xp->grad_buf();
                                  for (int64_t i = 0; i < self.grad.numel(); ++i)
                                      buf[am[(size_t)i]] += self.grad[i];
                              });
}

template <class S>
Var<S> upsample_nearest(const Var<S>& x, int64_t f) {
    const Tensor<S>& xv = x->value;
    if (xv.rank() != 3) throw ShapeError("upsample_nearest: want [c,h,w]");
    int64_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    Tensor<S> out({c, h * f, w * f});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h * f; ++y)
            for (int64_t x2 = 0; x2 < w * f; ++x2) out.at(ch, y, x2) = xv.at(ch, y / f, x2 / f);
    return detail::make_op<S>("upsample_nearest", std::move(out), {x},
                              [xp = x.get(), c, h, w, f](Node<S>& self) {
                                  if (!xp->requires_grad) return;
                                  Tensor<S>& buf = xp->grad_buf();
                                  for (int64_t ch = 0; ch < c; ++ch)
                                      for (int64_t y = 0; y < h * f; ++y)
                                          for (int64_t x2 = 0; x2 < w * f; ++x2)
                                              buf.at(ch, y / f, x2 / f) += self.grad.at(ch, y, x2);
                              });
}

template <class S>
Var<S> concat_channels(const Var<S>& a, const Var<S>& b) {
    const Tensor<S>&av = a->value, &bv = b->value;
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        throw ShapeError("concat_channels: spatial dims differ");
    Tensor<S> out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.numel());
    return detail::make_op<S>("concat_channels", std::move(out), {a, b},
                              [ap = a.get(), bp = b.get()](Node<S>& self) {
                                  int64_t na = ap->value.numel();
                                  if (ap->requires_grad) {
                                      Tensor<S>& buf = ap->grad_buf();
                                      for (int64_t i = 0; i < na; ++i) buf[i] += self.grad[i];
                                  }
                                  if (bp->requires_grad) {
                                      Tensor<S>& buf = bp->grad_buf();
                                      for (int64_t i = 0; i < bp->value.numel(); ++i)
                                          buf[i] += self.grad[na + i];
                                  }
                              });
}

// ---------------------------------------------------------------------------
// dense algebra
// ---------------------------------------------------------------------------

template <class S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
    const Tensor<S>&av = a->value, &bv = b->value;
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
        throw ShapeError("matmul: incompatible " + shape_str(av.shape) + " x " + shape_str(bv.shape));
    int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor<S> out({m, n});
    parallel_for(m, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            S* orow = out.ptr() + i * n;
            const S* arow = av.ptr() + i * k;
            for (int64_t l = 0; l < k; ++l) {
                S aval = arow[l];
                const S* brow = bv.ptr() + l * n;
                for (int64_t j = 0; j < n; ++j) orow[j] += aval * brow[j];
            }
        }
    });
    return detail::make_op<S>("matmul", std::move(out), {a, b},
                              [ap = a.get(), bp = b.get(), m, k, n](Node<S>& self) {
                                  const S* g = self.grad.ptr();
                                  if (ap->requires_grad) {
                                      S* da = ap->grad_buf().ptr();
                                      const S* bd = bp->value.ptr();
                                      parallel_for(m, [&](int64_t r0, int64_t r1) {
                                          for (int64_t i = r0; i < r1; ++i)
                                              for (int64_t l = 0; l < k; ++l)
                                                  da[i * k + l] +=
                                                      detail::dot_lanes(g + i * n, bd + l * n, n);
                                      });
                                  }
                                  if (bp->requires_grad) {
                                      S* db = bp->grad_buf().ptr();
                                      const S* ad = ap->value.ptr();
                                      parallel_for(k, [&](int64_t r0, int64_t r1) {
                                          for (int64_t l = r0; l < r1; ++l)
                                              for (int64_t i = 0; i < m; ++i) {
                                                  S aval = ad[i * k + l];
                                                  const S* grow = g + i * n;
                                                  S* dbrow = db + l * n;
                                                  for (int64_t j = 0; j < n; ++j) dbrow[j] += aval * grow[j];
                                              }
                                      });
                                  }
                              });
}

// x[m,n] + v[n] broadcast down rows.
template <class S>
Var<S> add_rowvec(const Var<S>& x, const Var<S>& v) {
    if (x->value.rank() != 2 || v->value.rank() != 1 || v->value.dim(0) != x->value.dim(1))
        throw ShapeError("add_rowvec: want x[m,n], v[n]");
    int64_t m = x->value.dim(0), n = x->value.dim(1);
    Tensor<S> out({m, n});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(i, j) = x->value.at(i, j) + v->value[j];
    return detail::make_op<S>("add_rowvec", std::move(out), {x, v},
                              [xp = x.get(), vp = v.get(), m, n](Node<S>& self) {
                                  detail::accum(*xp, self.grad);
                                  if (vp->requires_grad) {
                                      Tensor<S>& buf = vp->grad_buf();
                                      for (int64_t i = 0; i < m; ++i)
                                          for (int64_t j = 0; j < n; ++j) buf[j] += self.grad.at(i, j);
                                  }
                              });
}

template <class S>
Var<S> transpose2(const Var<S>& x) {
    if (x->value.rank() != 2) throw ShapeError("transpose2: want rank-2");
    int64_t m = x->value.dim(0), n = x->value.dim(1);
    Tensor<S> out({n, m});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(j, i) = x->value.at(i, j);
    return detail::make_op<S>("transpose2", std::move(out), {x}, [xp = x.get(), m, n](Node<S>& self) {
        if (!xp->requires_grad) return;
        Tensor<S>& buf = xp->grad_buf();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) buf.at(i, j) += self.grad.at(j, i);
    });
}

template <class S>
Var<S> slice_last(const Var<S>& x, int64_t start, int64_t len) {
    if (x->value.rank() != 2) throw ShapeError("slice_last: want rank-2");
    int64_t m = x->value.dim(0), n = x->value.dim(1);
    if (start < 0 || len < 1 || start + len > n) throw ShapeError("slice_last: range out of bounds");
    Tensor<S> out({m, len});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < len; ++j) out.at(i, j) = x->value.at(i, start + j);
    return detail::make_op<S>("slice_last", std::move(out), {x},
                              [xp = x.get(), m, len, start](Node<S>& self) {
                                  if (!xp->requires_grad) return;
                                  Tensor<S>& buf = xp->grad_buf();
                                  for (int64_t i = 0; i < m; ++i)
                                      for (int64_t j = 0; j < len; ++j)
                                          buf.at(i, start + j) += self.grad.at(i, j);
                              });
}

template <class S>
Var<S> concat_last(const std::vector<Var<S>>& xs) {
    if (xs.empty()) throw ValueError("concat_last: empty input list");
    int64_t m = xs[0]->value.dim(0), total = 0;
    for (auto& x : xs) {
        if (x->value.rank() != 2 || x->value.dim(0) != m) throw ShapeError("concat_last: row mismatch");
        total += x->value.dim(1);
    }
    Tensor<S> out({m, total});
    int64_t off = 0;
    for (auto& x : xs) {
        int64_t n = x->value.dim(1);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) out.at(i, off + j) = x->value.at(i, j);
        off += n;
    }
    std::vector<Var<S>> parents = xs;
    return detail::make_op<S>("concat_last", std::move(out), std::move(parents), [m](Node<S>& self) {
        int64_t off2 = 0;
        for (auto& p : self.parents) {
            int64_t n = p->value.dim(1);
            if (p->requires_grad) {
                Tensor<S>& buf = p->grad_buf();
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) buf.at(i, j) += self.grad.at(i, off2 + j);
            }
            off2 += n;
        }
    });
}

// ---------------------------------------------------------------------------
// softmax and layout changes
// ---------------------------------------------------------------------------

// Numerically stable softmax along one axis of an arbitrary-rank tensor.
template <class S>
Var<S> softmax_axis(const Var<S>& x, int axis) {
    const Tensor<S>& xv = x->value;
    if (axis < 0 || axis >= xv.rank()) throw ShapeError("softmax_axis: bad axis");
    int64_t n = xv.dim(axis);
    int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
    for (int i = 0; i < axis; ++i) outer *= xv.dim(i);
    Tensor<S> out(xv.shape);
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            const S* src = xv.ptr() + o * n * inner + in;
            S* dst = out.ptr() + o * n * inner + in;
            S mx = src[0];
            for (int64_t i = 1; i < n; ++i) mx = std::max(mx, src[i * inner]);
            S denom = 0;
            for (int64_t i = 0; i < n; ++i) {
                S e = std::exp(src[i * inner] - mx);
                dst[i * inner] = e;
                denom += e;
            }
            for (int64_t i = 0; i < n; ++i) dst[i * inner] /= denom;
        }
    return detail::make_op<S>("softmax_axis", std::move(out), {x},
                              [xp = x.get(), n, inner, outer](Node<S>& self) {
                                  if (!xp->requires_grad) return;
                                  Tensor<S>& buf = xp->grad_buf();
                                  for (int64_t o = 0; o < outer; ++o)
                                      for (int64_t in = 0; in < inner; ++in) {
                                          const S* y = self.value.ptr() + o * n * inner + in;
                                          const S* g = self.grad.ptr() + o * n * inner + in;
                                          S* d = buf.ptr() + o * n * inner + in;
                                          S dot = 0;
                                          for (int64_t i = 0; i < n; ++i) dot += y[i * inner] * g[i * inner];
                                          for (int64_t i = 0; i < n; ++i)
                                              d[i * inner] += y[i * inner] * (g[i * inner] - dot);
                                      }
                              });
}

// [c,h,w] -> [h*w, c] token matrix (row per spatial position).
template <class S>
Var<S> spatial_to_tokens(const Var<S>& x) {
    const Tensor<S>& xv = x->value;
    if (xv.rank() != 3) throw ShapeError("spatial_to_tokens: want [c,h,w]");
    int64_t c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    Tensor<S> out({hw, c});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < hw; ++i) out.at(i, ch) = xv[ch * hw + i];
    return detail::make_op<S>("spatial_to_tokens", std::move(out), {x},
                              [xp = x.get(), c, hw](Node<S>& self) {
                                  if (!xp->requires_grad) return;
                                  Tensor<S>& buf = xp->grad_buf();
                                  for (int64_t ch = 0; ch < c; ++ch)
                                      for (int64_t i = 0; i < hw; ++i) buf[ch * hw + i] += self.grad.at(i, ch);
                              });
}

template <class S>
Var<S> tokens_to_spatial(const Var<S>& t, int64_t h, int64_t w) {
    const Tensor<S>& tv = t->value;
    if (tv.rank() != 2 || tv.dim(0) != h * w) throw ShapeError("tokens_to_spatial: want [h*w, c]");
    int64_t c = tv.dim(1), hw = h * w;
    Tensor<S> out({c, h, w});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < hw; ++i) out[ch * hw + i] = tv.at(i, ch);
    return detail::make_op<S>("tokens_to_spatial", std::move(out), {t},
                              [tp = t.get(), c, hw](Node<S>& self) {
                                  if (!tp->requires_grad) return;
                                  Tensor<S>& buf = tp->grad_buf();
                                  for (int64_t ch = 0; ch < c; ++ch)
                                      for (int64_t i = 0; i < hw; ++i) buf.at(i, ch) += self.grad[ch * hw + i];
                              });
}

// One [h,w] plane of a [c,h,w] tensor.
template <class S>
Var<S> slice_channel(const Var<S>& x, int64_t c) {
    if (x->value.rank() != 3) throw ShapeError("slice_channel: want [c,h,w]");
    if (c < 0 || c >= x->value.dim(0)) throw ShapeError("slice_channel: index out of range");
    int64_t hw = x->value.dim(1) * x->value.dim(2);
    Tensor<S> out({x->value.dim(1), x->value.dim(2)});
    std::copy(x->value.data.begin() + c * hw, x->value.data.begin() + (c + 1) * hw,
              out.data.begin());
    return detail::make_op<S>("slice_channel", std::move(out), {x},
                              [xp = x.get(), c, hw](Node<S>& self) {
                                  if (!xp->requires_grad) return;
                                  Tensor<S>& buf = xp->grad_buf();
                                  for (int64_t i = 0; i < hw; ++i) buf[c * hw + i] += self.grad[i];
                              });
}

template <class S>
Var<S> reshape(const Var<S>& x, Shape shp) {
    if (shape_numel(shp) != x->value.numel())
        throw ShapeError("reshape: element count mismatch " + shape_str(x->value.shape) + " -> " +
                         shape_str(shp));
    Tensor<S> out(std::move(shp), x->value.data);
    return detail::make_op<S>("reshape", std::move(out), {x},
                              [xp = x.get()](Node<S>& self) { detail::accum(*xp, self.grad); });
}

// Zero parameter gradients in place (between optimizer steps).
template <class S>
void zero_grad(const Var<S>& v) {
    if (v->grad_alloc) std::fill(v->grad.data.begin(), v->grad.data.end(), S(0));
}

}  // namespace diffdepth
