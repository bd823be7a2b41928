#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "diffdepth/errors.hpp"

namespace diffdepth {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major multi-dimensional array. The only tensor carrier in the
// project; autodiff, FFT and all network code build on it.
template <class S>
struct Tensor {
    Shape shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(Shape shp) : shape(std::move(shp)), data(shape_numel(shape), S(0)) {
        for (int64_t e : shape)
            if (e <= 0) throw ShapeError("tensor extent must be positive, got " + shape_str(shape));
    }
    Tensor(Shape shp, std::vector<S> values) : shape(std::move(shp)), data(std::move(values)) {
        if ((int64_t)data.size() != shape_numel(shape))
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape shp) { return Tensor(std::move(shp)); }
    static Tensor full(Shape shp, S v) {
        Tensor t(std::move(shp));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor scalar(S v) { return Tensor({1}, {v}); }

    int64_t numel() const { return (int64_t)data.size(); }
    int rank() const { return (int)shape.size(); }
    int64_t dim(int i) const { return shape[(size_t)i]; }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    S& operator[](int64_t i) { return data[(size_t)i]; }
    const S& operator[](int64_t i) const { return data[(size_t)i]; }

    // Row-major accessors for the ranks used throughout.
    S& at(int64_t i, int64_t j) { return data[(size_t)(i * shape[1] + j)]; }
    const S& at(int64_t i, int64_t j) const { return data[(size_t)(i * shape[1] + j)]; }
    S& at(int64_t c, int64_t y, int64_t x) {
        return data[(size_t)((c * shape[1] + y) * shape[2] + x)];
    }
    const S& at(int64_t c, int64_t y, int64_t x) const {
        return data[(size_t)((c * shape[1] + y) * shape[2] + x)];
    }
    S& at(int64_t a, int64_t b, int64_t y, int64_t x) {
        return data[(size_t)(((a * shape[1] + b) * shape[2] + y) * shape[3] + x)];
    }
    const S& at(int64_t a, int64_t b, int64_t y, int64_t x) const {
        return data[(size_t)(((a * shape[1] + b) * shape[2] + y) * shape[3] + x)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    template <class T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = (T)data[i];
        return out;
    }
};

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
}

}  // namespace diffdepth
