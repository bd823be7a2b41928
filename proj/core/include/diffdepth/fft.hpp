#pragma once

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "diffdepth/graph.hpp"
#include "diffdepth/ops.hpp"

// Real 2D FFT with half-spectrum storage.
//
// Conventions (fixed so spectral masks are convention-independent):
//   forward:  X[ky,kx] = sum_n x[n] * exp(-2*pi*i*(ky*y/h + kx*x/w)), unnormalized
//   inverse:  x[n] = (1/(h*w)) * sum_k X[k] * exp(+2*pi*i*(...)), real part
//
// A spectrum of a [c,h,w] real signal is stored as a [2,c,h,w/2+1] tensor:
// plane 0 holds the real part, plane 1 the imaginary part of the
// non-redundant half along the width axis. Masking only this half and
// taking the real part of the inverse is equivalent to masking the full
// spectrum with the Hermitian-symmetrized mask, so outputs stay real.

namespace diffdepth {

namespace fftdetail {

constexpr double kPi = 3.14159265358979323846;

inline bool is_pow2(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place 1D transform with stride. sign=-1: forward, sign=+1: inverse
// (unnormalized in both directions). Radix-2 when the length is a power of
// two; O(n^2) direct transform otherwise (desk-scale sizes are tiny).
template <class C>
void transform_strided(C* a, int64_t n, int64_t stride, int sign) {
    using R = typename C::value_type;
    if (n == 1) return;
    if (is_pow2(n)) {
        // bit reversal
        for (int64_t i = 1, j = 0; i < n; ++i) {
            int64_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(a[i * stride], a[j * stride]);
        }
        for (int64_t len = 2; len <= n; len <<= 1) {
            double ang = sign * 2.0 * kPi / (double)len;
            C wl((R)std::cos(ang), (R)std::sin(ang));
            for (int64_t i = 0; i < n; i += len) {
                C w(1, 0);
                for (int64_t k = 0; k < len / 2; ++k) {
                    C u = a[(i + k) * stride];
                    C v = a[(i + k + len / 2) * stride] * w;
                    a[(i + k) * stride] = u + v;
                    a[(i + k + len / 2) * stride] = u - v;
                    w *= wl;
                }
            }
        }
    } else {
        std::vector<C> tmp((size_t)n);
        for (int64_t k = 0; k < n; ++k) {
            C acc(0, 0);
            for (int64_t m = 0; m < n; ++m) {
                double ang = sign * 2.0 * kPi * (double)(k * m % n) / (double)n;
                acc += a[m * stride] * C((R)std::cos(ang), (R)std::sin(ang));
            }
            tmp[(size_t)k] = acc;
        }
        for (int64_t k = 0; k < n; ++k) a[k * stride] = tmp[(size_t)k];
    }
}

// 2D transform of one h x w complex plane (rows, then columns).
template <class C>
void transform2d(std::vector<C>& plane, int64_t h, int64_t w, int sign) {
    for (int64_t y = 0; y < h; ++y) transform_strided(plane.data() + y * w, w, 1, sign);
    for (int64_t x = 0; x < w; ++x) transform_strided(plane.data() + x, h, w, sign);
}

}  // namespace fftdetail

inline int64_t half_spectrum_width(int64_t w) { return w / 2 + 1; }

// --------------------------------------------------------------------------
// raw (non-autodiff) kernels
// --------------------------------------------------------------------------

// x[c,h,w] -> [2,c,h,wh]
template <class S>
Tensor<S> rfft2_raw(const Tensor<S>& x) {
    if (x.rank() != 3) throw ShapeError("rfft2: want rank-3 [c,h,w], got " + shape_str(x.shape));
    using C = std::complex<double>;
    int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    int64_t wh = half_spectrum_width(w);
    Tensor<S> out({2, c, h, wh});
    std::vector<C> plane((size_t)(h * w));
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t i = 0; i < h * w; ++i) plane[(size_t)i] = C((double)x[ch * h * w + i], 0.0);
        fftdetail::transform2d(plane, h, w, -1);
        for (int64_t ky = 0; ky < h; ++ky)
            for (int64_t kx = 0; kx < wh; ++kx) {
                out.at(0, ch, ky, kx) = (S)plane[(size_t)(ky * w + kx)].real();
                out.at(1, ch, ky, kx) = (S)plane[(size_t)(ky * w + kx)].imag();
            }
    }
    return out;
}

// s[2,c,h,wh] -> [c,h,out_w]
template <class S>
Tensor<S> irfft2_raw(const Tensor<S>& s, int64_t out_w) {
    if (s.rank() != 4 || s.dim(0) != 2)
        throw ShapeError("irfft2: want [2,c,h,wh], got " + shape_str(s.shape));
    int64_t c = s.dim(1), h = s.dim(2), wh = s.dim(3);
    if (half_spectrum_width(out_w) != wh)
        throw ShapeError("irfft2: output width " + std::to_string(out_w) +
                         " inconsistent with half-spectrum width " + std::to_string(wh));
    using C = std::complex<double>;
    int64_t w = out_w;
    Tensor<S> out({c, h, w});
    std::vector<C> plane((size_t)(h * w));
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t ky = 0; ky < h; ++ky)
            for (int64_t kx = 0; kx < w; ++kx) {
                if (kx < wh) {
                    plane[(size_t)(ky * w + kx)] = C(s.at(0, ch, ky, kx), s.at(1, ch, ky, kx));
                } else {
                    int64_t my = (h - ky) % h, mx = w - kx;
                    plane[(size_t)(ky * w + kx)] = C(s.at(0, ch, my, mx), -s.at(1, ch, my, mx));
                }
            }
        fftdetail::transform2d(plane, h, w, +1);
        double norm = 1.0 / (double)(h * w);
        for (int64_t i = 0; i < h * w; ++i) out[ch * h * w + i] = (S)(plane[(size_t)i].real() * norm);
    }
    return out;
}

// Adjoint of rfft2 as a real-linear map: g[2,c,h,wh] -> [c,h,w].
template <class S>
Tensor<S> rfft2_adjoint(const Tensor<S>& g, int64_t w) {
    using C = std::complex<double>;
    int64_t c = g.dim(1), h = g.dim(2), wh = g.dim(3);
    Tensor<S> out({c, h, w});
    std::vector<C> plane((size_t)(h * w));
    for (int64_t ch = 0; ch < c; ++ch) {
        std::fill(plane.begin(), plane.end(), C(0, 0));
        for (int64_t ky = 0; ky < h; ++ky)
            for (int64_t kx = 0; kx < wh; ++kx)
                plane[(size_t)(ky * w + kx)] = C(g.at(0, ch, ky, kx), g.at(1, ch, ky, kx));
        fftdetail::transform2d(plane, h, w, +1);
        for (int64_t i = 0; i < h * w; ++i) out[ch * h * w + i] = (S)plane[(size_t)i].real();
    }
    return out;
}

// Adjoint of irfft2 as a real-linear map: g[c,h,w] -> [2,c,h,wh].
template <class S>
Tensor<S> irfft2_adjoint(const Tensor<S>& g) {
    using C = std::complex<double>;
    int64_t c = g.dim(0), h = g.dim(1), w = g.dim(2);
    int64_t wh = half_spectrum_width(w);
    Tensor<S> out({2, c, h, wh});
    std::vector<C> plane((size_t)(h * w));
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t i = 0; i < h * w; ++i) plane[(size_t)i] = C((double)g[ch * h * w + i], 0.0);
        fftdetail::transform2d(plane, h, w, -1);
        double norm = 1.0 / (double)(h * w);
        for (int64_t ky = 0; ky < h; ++ky)
            for (int64_t kx = 0; kx < wh; ++kx) {
                C hk = plane[(size_t)(ky * w + kx)] * norm;
                double re = hk.real(), im = hk.imag();
                // bins mirrored by the Hermitian expansion also collect the
                // conjugate path
                if (kx >= 1 && kx <= w - wh) {
                    C hm = plane[(size_t)((((h - ky) % h) * w) + (w - kx))] * norm;
                    re += hm.real();
                    im -= hm.imag();
                }
                out.at(0, ch, ky, kx) = (S)re;
                out.at(1, ch, ky, kx) = (S)im;
            }
    }
    return out;
}

// --------------------------------------------------------------------------
// autodiff wrappers
// --------------------------------------------------------------------------

template <class S>
Var<S> rfft2(const Var<S>& x) {
    int64_t w = x->value.rank() == 3 ? x->value.dim(2) : -1;
    Tensor<S> out = rfft2_raw(x->value);
    return detail::make_op<S>("rfft2", std::move(out), {x}, [xp = x.get(), w](Node<S>& self) {
        if (!xp->requires_grad) return;
        Tensor<S> gx = rfft2_adjoint(self.grad, w);
        detail::accum(*xp, gx);
    });
}

template <class S>
Var<S> irfft2(const Var<S>& s, int64_t out_w) {
    Tensor<S> out = irfft2_raw(s->value, out_w);
    return detail::make_op<S>("irfft2", std::move(out), {s}, [sp = s.get()](Node<S>& self) {
        if (!sp->requires_grad) return;
        Tensor<S> gs = irfft2_adjoint(self.grad);
        detail::accum(*sp, gs);
    });
}

// Magnitude of a stacked spectrum: [2,c,h,wh] -> [c,h,wh]. Gradient at
// zero magnitude is defined as 0 (subgradient choice).
template <class S>
Var<S> spec_mag(const Var<S>& s) {
    const Tensor<S>& sv = s->value;
    if (sv.rank() != 4 || sv.dim(0) != 2) throw ShapeError("spec_mag: want [2,c,h,wh]");
    int64_t n = sv.numel() / 2;
    Tensor<S> out({sv.dim(1), sv.dim(2), sv.dim(3)});
    for (int64_t i = 0; i < n; ++i)
        out[i] = std::sqrt(sv[i] * sv[i] + sv[n + i] * sv[n + i]);
    return detail::make_op<S>("spec_mag", std::move(out), {s}, [sp = s.get(), n](Node<S>& self) {
        if (!sp->requires_grad) return;
        Tensor<S>& buf = sp->grad_buf();
        for (int64_t i = 0; i < n; ++i) {
            S a = self.value[i];
            if (a == S(0)) continue;
            buf[i] += self.grad[i] * sp->value[i] / a;
            buf[n + i] += self.grad[i] * sp->value[n + i] / a;
        }
    });
}

// Phase of a stacked spectrum, atan2(im, re) in (-pi, pi]; 0 where the
// magnitude is zero. Gradient at zero magnitude is 0.
template <class S>
Var<S> spec_phase(const Var<S>& s) {
    const Tensor<S>& sv = s->value;
    if (sv.rank() != 4 || sv.dim(0) != 2) throw ShapeError("spec_phase: want [2,c,h,wh]");
    int64_t n = sv.numel() / 2;
    Tensor<S> out({sv.dim(1), sv.dim(2), sv.dim(3)});
    for (int64_t i = 0; i < n; ++i)
        out[i] = (sv[i] == S(0) && sv[n + i] == S(0)) ? S(0) : std::atan2(sv[n + i], sv[i]);
    return detail::make_op<S>("spec_phase", std::move(out), {s}, [sp = s.get(), n](Node<S>& self) {
        if (!sp->requires_grad) return;
        Tensor<S>& buf = sp->grad_buf();
        for (int64_t i = 0; i < n; ++i) {
            S re = sp->value[i], im = sp->value[n + i];
            S a2 = re * re + im * im;
            if (a2 == S(0)) continue;
            buf[i] += self.grad[i] * (-im / a2);
            buf[n + i] += self.grad[i] * (re / a2);
        }
    });
}

// Rebuild a stacked spectrum from magnitude and phase.
template <class S>
Var<S> spec_compose(const Var<S>& mag, const Var<S>& phase) {
    check_same_shape(mag->value, phase->value, "spec_compose");
    if (mag->value.rank() != 3) throw ShapeError("spec_compose: want [c,h,wh]");
    int64_t n = mag->value.numel();
    Tensor<S> out({2, mag->value.dim(0), mag->value.dim(1), mag->value.dim(2)});
    for (int64_t i = 0; i < n; ++i) {
        out[i] = mag->value[i] * std::cos(phase->value[i]);
        out[n + i] = mag->value[i] * std::sin(phase->value[i]);
    }
    return detail::make_op<S>("spec_compose", std::move(out), {mag, phase},
                              [mp = mag.get(), pp = phase.get(), n](Node<S>& self) {
                                  for (int64_t i = 0; i < n; ++i) {
                                      S gre = self.grad[i], gim = self.grad[n + i];
                                      S cp = std::cos(pp->value[i]), sp2 = std::sin(pp->value[i]);
                                      if (mp->requires_grad) mp->grad_buf()[i] += gre * cp + gim * sp2;
                                      if (pp->requires_grad)
                                          pp->grad_buf()[i] +=
                                              -gre * self.value[n + i] + gim * self.value[i];
                                  }
                              });
}

// (magnitude, phase) pair of a spectrum.
template <class S>
std::pair<Var<S>, Var<S>> magphase(const Var<S>& s) {
    return {spec_mag(s), spec_phase(s)};
}

}  // namespace diffdepth
