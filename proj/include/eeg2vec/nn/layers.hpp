#pragma once

// Layer kinds of the differentiable substrate. Each kind knows its output
// shape, declares its parameters, and implements forward/backward over a
// batch. Convolutional activations are [N, channels, height, width] with
// height = electrodes and width = time.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <variant>
#include <vector>

#include "eeg2vec/error.hpp"
#include "eeg2vec/nn/param_store.hpp"
#include "eeg2vec/nn/tensor.hpp"
#include "eeg2vec/rng.hpp"

namespace eeg2vec::nn {

enum class Mode { train, eval };

enum class ActKind { linear, relu, elu, sigmoid, softmax };

inline const char* to_string(ActKind k) {
    switch (k) {
        case ActKind::linear: return "linear";
        case ActKind::relu: return "relu";
        case ActKind::elu: return "elu";
        case ActKind::sigmoid: return "sigmoid";
        case ActKind::softmax: return "softmax";
    }
    return "?";
}

enum class Init { fan_in_normal, zeros, ones };

struct ParamDecl {
    std::string name;
    Shape shape;
    Init init = Init::fan_in_normal;
    std::size_t fan_in = 1;
    bool trainable = true;
};

/// Per-layer record kept by forward for backward.
template <class T>
struct LayerCache {
    Tensor<T> input;
    Tensor<T> output;
    Tensor<T> aux;
    std::vector<T> mean;
    std::vector<T> var;
    Shape in_shape;
    bool train = false;
};

namespace kernels {

template <class T>
inline T dot(const T* a, const T* b, std::size_t n) {
    T s0{0}, s1{0}, s2{0}, s3{0}, s4{0}, s5{0}, s6{0}, s7{0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

template <class T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

/// out[i] += sum_{m < na} a[m] * b[i + m] for i < nout; b must hold
/// nout + na - 1 values. Blocks of outputs are accumulated in vector
/// registers (GCC/Clang vector extensions).
template <class T>
inline void corr_valid(const T* a, std::size_t na, const T* b, T* out, std::size_t nout) {
    constexpr std::size_t V = 32 / sizeof(T);
    typedef T vec __attribute__((vector_size(32)));
    const auto load = [](const T* p) {
        vec v;
        std::memcpy(&v, p, sizeof v);
        return v;
    };
    std::size_t i0 = 0;
    for (; i0 + 4 * V <= nout; i0 += 4 * V) {
        vec acc0{}, acc1{}, acc2{}, acc3{};
        for (std::size_t m = 0; m < na; ++m) {
            const T* bm = b + i0 + m;
            const T am = a[m];
            acc0 += am * load(bm);
            acc1 += am * load(bm + V);
            acc2 += am * load(bm + 2 * V);
            acc3 += am * load(bm + 3 * V);
        }
        for (std::size_t i = 0; i < V; ++i) {
            out[i0 + i] += acc0[i];
            out[i0 + V + i] += acc1[i];
            out[i0 + 2 * V + i] += acc2[i];
            out[i0 + 3 * V + i] += acc3[i];
        }
    }
    for (; i0 + V <= nout; i0 += V) {
        vec acc{};
        for (std::size_t m = 0; m < na; ++m) acc += a[m] * load(b + i0 + m);
        for (std::size_t i = 0; i < V; ++i) out[i0 + i] += acc[i];
    }
    for (; i0 < nout; ++i0) out[i0] += dot(a, b + i0, na);
}

/// Zero-padded copy of a row: `left` zeros, the row, then `right` zeros.
template <class T>
inline const T* padded(const T* x, std::size_t width, std::size_t left, std::size_t right, std::vector<T>& buf) {
    buf.assign(left + width + right, T{0});
    std::copy(x, x + width, buf.begin() + static_cast<std::ptrdiff_t>(left));
    return buf.data();
}

/// y[t] += sum_k w[k] x[t + k - pad]   ('same' correlation)
template <class T>
inline void row_corr(const T* x, const T* w, std::size_t k, std::size_t pad, T* y, std::size_t width) {
    thread_local std::vector<T> buf;
    corr_valid(w, k, padded(x, width, pad, k - 1 - pad, buf), y, width);
}

/// gx[t + k - pad] += w[k] gy[t]
template <class T>
inline void row_corr_adjoint(const T* gy, const T* w, std::size_t k, std::size_t pad, T* gx,
                             std::size_t width) {
    thread_local std::vector<T> buf, flipped;
    flipped.assign(w, w + k);
    std::reverse(flipped.begin(), flipped.end());
    corr_valid(flipped.data(), k, padded(gy, width, k - 1 - pad, pad, buf), gx, width);
}

/// gw[k] += sum_t gy[t] x[t + k - pad]
template <class T>
inline void row_corr_wgrad(const T* gy, const T* x, std::size_t k, std::size_t pad, T* gw,
                           std::size_t width) {
    thread_local std::vector<T> buf;
    corr_valid(gy, width, padded(x, width, pad, k - 1 - pad, buf), gw, k);
}

}  // namespace kernels

namespace detail {

inline void expect_rank(const Shape& s, std::size_t rank, const char* layer) {
    require(s.size() == rank, ErrorKind::shape,
            std::string(layer) + ": expected rank " + std::to_string(rank) + " input, got " + to_string(s));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution operators. Each provides apply (forward map), adjoint (its
// transpose, i.e. the gradient w.r.t. its input) and wgrad(u, v), the
// gradient of <apply(u), v> w.r.t. the weights. A forward layer uses
// (apply, adjoint, wgrad(x, gy)); its transposed layer uses
// (adjoint, apply, wgrad(gy, x)).

/// Temporal convolution along width, 'same' padding, no bias.
/// [N, in_ch, H, W] -> [N, out_ch, H, W]; weights w: [out_ch, in_ch, kernel].
struct ConvTemporal {
    std::size_t in_ch = 1, out_ch = 1, kernel = 1;

    std::size_t pad() const { return (kernel - 1) / 2; }

    Shape out_shape(const Shape& s) const {
        detail::expect_rank(s, 4, "conv-temporal");
        require(s[1] == in_ch, ErrorKind::shape, "conv-temporal: expected " + std::to_string(in_ch) +
                                                     " input channels, got " + to_string(s));
        return {s[0], out_ch, s[2], s[3]};
    }
    Shape in_shape(const Shape& s) const {
        detail::expect_rank(s, 4, "conv-temporal^T");
        require(s[1] == out_ch, ErrorKind::shape, "conv-temporal^T: expected " + std::to_string(out_ch) +
                                                      " input channels, got " + to_string(s));
        return {s[0], in_ch, s[2], s[3]};
    }
    std::vector<ParamDecl> decls(bool transposed) const {
        return {{"w", {out_ch, in_ch, kernel}, Init::fan_in_normal,
                 transposed ? out_ch * kernel : in_ch * kernel, true}};
    }

    template <class T>
    Tensor<T> apply(const Tensor<T>& x, const ParamStore<T>& ps, const std::string& key) const {
        Tensor<T> y(out_shape(x.shape));
        const T* w = ps.value(key + "w").ptr();
        const std::size_t n = x.dim(0), h = x.dim(2), wd = x.dim(3);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_ch; ++o)
                for (std::size_t i = 0; i < in_ch; ++i)
                    for (std::size_t r = 0; r < h; ++r)
                        kernels::row_corr(x.ptr() + ((b * in_ch + i) * h + r) * wd, w + (o * in_ch + i) * kernel,
                                          kernel, pad(), y.ptr() + ((b * out_ch + o) * h + r) * wd, wd);
        return y;
    }

    template <class T>
    Tensor<T> adjoint(const Tensor<T>& gy, const ParamStore<T>& ps, const std::string& key) const {
        Tensor<T> gx(in_shape(gy.shape));
        const T* w = ps.value(key + "w").ptr();
        const std::size_t n = gy.dim(0), h = gy.dim(2), wd = gy.dim(3);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_ch; ++o)
                for (std::size_t i = 0; i < in_ch; ++i)
                    for (std::size_t r = 0; r < h; ++r)
                        kernels::row_corr_adjoint(gy.ptr() + ((b * out_ch + o) * h + r) * wd,
                                                  w + (o * in_ch + i) * kernel, kernel, pad(),
                                                  gx.ptr() + ((b * in_ch + i) * h + r) * wd, wd);
        return gx;
    }

    template <class T>
    void wgrad(const Tensor<T>& u, const Tensor<T>& v, ParamStore<T>& ps, const std::string& key) const {
        T* gw = ps.grad(key + "w").ptr();
        const std::size_t n = u.dim(0), h = u.dim(2), wd = u.dim(3);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_ch; ++o)
                for (std::size_t i = 0; i < in_ch; ++i)
                    for (std::size_t r = 0; r < h; ++r)
                        kernels::row_corr_wgrad(v.ptr() + ((b * out_ch + o) * h + r) * wd,
                                                u.ptr() + ((b * in_ch + i) * h + r) * wd, kernel, pad(),
                                                gw + (o * in_ch + i) * kernel, wd);
    }
};

/// Depthwise spatial convolution spanning all electrodes, no bias.
/// [N, in_ch, height, W] -> [N, in_ch * depth, 1, W]; weights w: [in_ch * depth, height].
struct ConvDepthwiseSpatial {
    std::size_t in_ch = 1, depth = 1, height = 1;

    Shape out_shape(const Shape& s) const {
        detail::expect_rank(s, 4, "conv-depthwise-spatial");
        require(s[1] == in_ch && s[2] == height, ErrorKind::shape,
                "conv-depthwise-spatial: expected [N," + std::to_string(in_ch) + "," + std::to_string(height) +
                    ",W], got " + to_string(s));
        return {s[0], in_ch * depth, 1, s[3]};
    }
    Shape in_shape(const Shape& s) const {
        detail::expect_rank(s, 4, "conv-depthwise-spatial^T");
        require(s[1] == in_ch * depth && s[2] == 1, ErrorKind::shape,
                "conv-depthwise-spatial^T: expected [N," + std::to_string(in_ch * depth) + ",1,W], got " +
                    to_string(s));
        return {s[0], in_ch, height, s[3]};
    }
    std::vector<ParamDecl> decls(bool transposed) const {
        return {{"w", {in_ch * depth, height}, Init::fan_in_normal, transposed ? depth : height, true}};
    }

    template <class T>
    Tensor<T> apply(const Tensor<T>& x, const ParamStore<T>& ps, const std::string& key) const {
        Tensor<T> y(out_shape(x.shape));
        const T* w = ps.value(key + "w").ptr();
        const std::size_t n = x.dim(0), wd = x.dim(3), oc = in_ch * depth;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < oc; ++o) {
                const std::size_t i = o / depth;
                T* yr = y.ptr() + (b * oc + o) * wd;
                for (std::size_t r = 0; r < height; ++r)
                    kernels::axpy(w[o * height + r], x.ptr() + ((b * in_ch + i) * height + r) * wd, yr, wd);
            }
        return y;
    }

    template <class T>
    Tensor<T> adjoint(const Tensor<T>& gy, const ParamStore<T>& ps, const std::string& key) const {
        Tensor<T> gx(in_shape(gy.shape));
        const T* w = ps.value(key + "w").ptr();
        const std::size_t n = gy.dim(0), wd = gy.dim(3), oc = in_ch * depth;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < oc; ++o) {
                const std::size_t i = o / depth;
                const T* gr = gy.ptr() + (b * oc + o) * wd;
                for (std::size_t r = 0; r < height; ++r)
                    kernels::axpy(w[o * height + r], gr, gx.ptr() + ((b * in_ch + i) * height + r) * wd, wd);
            }
        return gx;
    }

    template <class T>
    void wgrad(const Tensor<T>& u, const Tensor<T>& v, ParamStore<T>& ps, const std::string& key) const {
        T* gw = ps.grad(key + "w").ptr();
        const std::size_t n = u.dim(0), wd = u.dim(3), oc = in_ch * depth;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < oc; ++o) {
                const std::size_t i = o / depth;
                const T* vr = v.ptr() + (b * oc + o) * wd;
                for (std::size_t r = 0; r < height; ++r)
                    gw[o * height + r] += kernels::dot(vr, u.ptr() + ((b * in_ch + i) * height + r) * wd, wd);
            }
    }
};

/// Separable convolution: per-channel temporal filter ('same', weights
/// dw: [channels, kernel]) followed by a pointwise channel mix (pw: [out_ch, channels]).
struct ConvSeparable {
    std::size_t channels = 1, out_ch = 1, kernel = 1;

    std::size_t pad() const { return (kernel - 1) / 2; }

    Shape out_shape(const Shape& s) const {
        detail::expect_rank(s, 4, "conv-separable");
        require(s[1] == channels, ErrorKind::shape, "conv-separable: expected " + std::to_string(channels) +
                                                        " input channels, got " + to_string(s));
        return {s[0], out_ch, s[2], s[3]};
    }
    Shape in_shape(const Shape& s) const {
        detail::expect_rank(s, 4, "conv-separable^T");
        require(s[1] == out_ch, ErrorKind::shape, "conv-separable^T: expected " + std::to_string(out_ch) +
                                                      " input channels, got " + to_string(s));
        return {s[0], channels, s[2], s[3]};
    }
    std::vector<ParamDecl> decls(bool transposed) const {
        return {{"dw", {channels, kernel}, Init::fan_in_normal, kernel, true},
                {"pw", {out_ch, channels}, Init::fan_in_normal, transposed ? out_ch : channels, true}};
    }

    template <class T>
    Tensor<T> depthwise(const Tensor<T>& x, const T* dw) const {
        Tensor<T> u(x.shape);
        const std::size_t n = x.dim(0), h = x.dim(2), wd = x.dim(3);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < channels; ++i)
                for (std::size_t r = 0; r < h; ++r) {
                    const std::size_t off = ((b * channels + i) * h + r) * wd;
                    kernels::row_corr(x.ptr() + off, dw + i * kernel, kernel, pad(), u.ptr() + off, wd);
                }
        return u;
    }

    /// [N, channels, H, W] mixed to [N, out_ch, H, W] (or transposed).
    template <class T>
    Tensor<T> pointwise(const Tensor<T>& u, const T* pw, bool transposed) const {
        const std::size_t n = u.dim(0), h = u.dim(2), wd = u.dim(3);
        const std::size_t src = transposed ? out_ch : channels;
        const std::size_t dst = transposed ? channels : out_ch;
        Tensor<T> y({n, dst, h, wd});
        const std::size_t plane = h * wd;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < dst; ++o)
                for (std::size_t i = 0; i < src; ++i) {
                    const T coef = transposed ? pw[i * channels + o] : pw[o * channels + i];
                    kernels::axpy(coef, u.ptr() + (b * src + i) * plane, y.ptr() + (b * dst + o) * plane, plane);
                }
        return y;
    }

    template <class T>
    Tensor<T> apply(const Tensor<T>& x, const ParamStore<T>& ps, const std::string& key) const {
        out_shape(x.shape);
        return pointwise(depthwise(x, ps.value(key + "dw").ptr()), ps.value(key + "pw").ptr(), false);
    }

    template <class T>
    Tensor<T> adjoint(const Tensor<T>& gy, const ParamStore<T>& ps, const std::string& key) const {
        in_shape(gy.shape);
        const Tensor<T> gu = pointwise(gy, ps.value(key + "pw").ptr(), true);
        const T* dw = ps.value(key + "dw").ptr();
        Tensor<T> gx(gu.shape);
        const std::size_t n = gu.dim(0), h = gu.dim(2), wd = gu.dim(3);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < channels; ++i)
                for (std::size_t r = 0; r < h; ++r) {
                    const std::size_t off = ((b * channels + i) * h + r) * wd;
                    kernels::row_corr_adjoint(gu.ptr() + off, dw + i * kernel, kernel, pad(), gx.ptr() + off, wd);
                }
        return gx;
    }

    template <class T>
    void wgrad(const Tensor<T>& u, const Tensor<T>& v, ParamStore<T>& ps, const std::string& key) const {
        const T* dw = ps.value(key + "dw").ptr();
        const T* pw = ps.value(key + "pw").ptr();
        T* gdw = ps.grad(key + "dw").ptr();
        T* gpw = ps.grad(key + "pw").ptr();
        const Tensor<T> mid = depthwise(u, dw);
        const std::size_t n = u.dim(0), h = u.dim(2), wd = u.dim(3), plane = h * wd;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_ch; ++o)
                for (std::size_t i = 0; i < channels; ++i)
                    gpw[o * channels + i] +=
                        kernels::dot(v.ptr() + (b * out_ch + o) * plane, mid.ptr() + (b * channels + i) * plane, plane);
        const Tensor<T> gmid = pointwise(v, pw, true);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < channels; ++i)
                for (std::size_t r = 0; r < h; ++r) {
                    const std::size_t off = ((b * channels + i) * h + r) * wd;
                    kernels::row_corr_wgrad(gmid.ptr() + off, u.ptr() + off, kernel, pad(), gdw + i * kernel, wd);
                }
    }
};

template <class Conv>
concept ConvOperator = requires(const Conv& c, const Shape& s) {
    { c.out_shape(s) } -> std::same_as<Shape>;
    { c.in_shape(s) } -> std::same_as<Shape>;
    { c.decls(true) } -> std::same_as<std::vector<ParamDecl>>;
};

/// Forward application of a convolution operator as a layer.
template <ConvOperator Conv>
struct ConvLayer {
    Conv op;

    Shape output_shape(const Shape& s) const { return op.out_shape(s); }
    std::vector<ParamDecl> params() const { return op.decls(false); }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>& ps, const std::string& key, Mode, Rng&,
                      LayerCache<T>& cache) const {
        cache.input = x;
        return op.apply(x, ps, key);
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>& ps,
                       const std::string& key, bool need_gx) const {
        op.wgrad(cache.input, gy, ps, key);
        return need_gx ? op.adjoint(gy, ps, key) : Tensor<T>{};
    }
};

/// Transposed convolution: forward is the adjoint (input-gradient) of `op`,
/// so it maps op's output shape exactly back to op's input shape.
template <ConvOperator Conv>
struct TransposedConvLayer {
    Conv op;

    Shape output_shape(const Shape& s) const { return op.in_shape(s); }
    std::vector<ParamDecl> params() const { return op.decls(true); }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>& ps, const std::string& key, Mode, Rng&,
                      LayerCache<T>& cache) const {
        cache.input = x;
        return op.adjoint(x, ps, key);
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>& ps,
                       const std::string& key, bool need_gx) const {
        op.wgrad(gy, cache.input, ps, key);
        return need_gx ? op.apply(gy, ps, key) : Tensor<T>{};
    }
};

using TemporalConv = ConvLayer<ConvTemporal>;
using DepthwiseSpatialConv = ConvLayer<ConvDepthwiseSpatial>;
using SeparableConv = ConvLayer<ConvSeparable>;
using TransposedTemporalConv = TransposedConvLayer<ConvTemporal>;
using TransposedDepthwiseSpatialConv = TransposedConvLayer<ConvDepthwiseSpatial>;
using TransposedSeparableConv = TransposedConvLayer<ConvSeparable>;

// ---------------------------------------------------------------------------

/// Fully connected: [N, in] -> [N, out]; w: [out, in], b: [out].
struct Dense {
    std::size_t in = 1, out = 1;

    Shape output_shape(const Shape& s) const {
        detail::expect_rank(s, 2, "dense");
        require(s[1] == in, ErrorKind::shape,
                "dense: expected " + std::to_string(in) + " features, got " + to_string(s));
        return {s[0], out};
    }
    std::vector<ParamDecl> params() const {
        return {{"w", {out, in}, Init::fan_in_normal, in, true}, {"b", {out}, Init::zeros, 1, true}};
    }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>& ps, const std::string& key, Mode, Rng&,
                      LayerCache<T>& cache) const {
        Tensor<T> y(output_shape(x.shape));
        const T* w = ps.value(key + "w").ptr();
        const T* bias = ps.value(key + "b").ptr();
        const std::size_t n = x.dim(0);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out; ++o)
                y[b * out + o] = bias[o] + kernels::dot(w + o * in, x.ptr() + b * in, in);
        cache.input = x;
        return y;
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>& ps,
                       const std::string& key, bool need_gx) const {
        const T* w = ps.value(key + "w").ptr();
        T* gw = ps.grad(key + "w").ptr();
        T* gb = ps.grad(key + "b").ptr();
        const std::size_t n = gy.dim(0);
        Tensor<T> gx;
        if (need_gx) gx = Tensor<T>(cache.input.shape);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out; ++o) {
                const T g = gy[b * out + o];
                if (g == T{0}) continue;
                gb[o] += g;
                kernels::axpy(g, cache.input.ptr() + b * in, gw + o * in, in);
                if (need_gx) kernels::axpy(g, w + o * in, gx.ptr() + b * in, in);
            }
        return gx;
    }
};

/// Average pooling along width with stride = factor; trailing samples that
/// do not fill a window are dropped.
struct AvgPool {
    std::size_t factor = 1;

    Shape output_shape(const Shape& s) const {
        detail::expect_rank(s, 4, "average-pool");
        require(s[3] / factor >= 1, ErrorKind::shape, "average-pool: width shorter than pool " + to_string(s));
        return {s[0], s[1], s[2], s[3] / factor};
    }
    std::vector<ParamDecl> params() const { return {}; }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>&, const std::string&, Mode, Rng&,
                      LayerCache<T>& cache) const {
        Tensor<T> y(output_shape(x.shape));
        const std::size_t rows = x.dim(0) * x.dim(1) * x.dim(2), wi = x.dim(3), wo = y.dim(3);
        const T inv = T{1} / static_cast<T>(factor);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t t = 0; t < wo; ++t) {
                T s{0};
                for (std::size_t j = 0; j < factor; ++j) s += x[r * wi + t * factor + j];
                y[r * wo + t] = s * inv;
            }
        cache.in_shape = x.shape;
        return y;
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>&, const std::string&,
                       bool) const {
        Tensor<T> gx(cache.in_shape);
        const std::size_t rows = gx.dim(0) * gx.dim(1) * gx.dim(2), wi = gx.dim(3), wo = gy.dim(3);
        const T inv = T{1} / static_cast<T>(factor);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t t = 0; t < wo; ++t)
                for (std::size_t j = 0; j < factor; ++j) gx[r * wi + t * factor + j] = gy[r * wo + t] * inv;
        return gx;
    }
};

/// Nearest-neighbour upsampling along width to an explicit output width:
/// y[t] = x[min(t / factor, W_in - 1)]. The explicit width undoes a pooling
/// stage that dropped trailing samples.
struct Upsample {
    std::size_t factor = 1;
    std::size_t out_width = 1;

    Shape output_shape(const Shape& s) const {
        detail::expect_rank(s, 4, "upsample");
        require(s[3] >= 1, ErrorKind::shape, "upsample: empty width");
        return {s[0], s[1], s[2], out_width};
    }
    std::vector<ParamDecl> params() const { return {}; }

    std::size_t source(std::size_t t, std::size_t wi) const { return std::min(t / factor, wi - 1); }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>&, const std::string&, Mode, Rng&,
                      LayerCache<T>& cache) const {
        Tensor<T> y(output_shape(x.shape));
        const std::size_t rows = x.dim(0) * x.dim(1) * x.dim(2), wi = x.dim(3);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t t = 0; t < out_width; ++t) y[r * out_width + t] = x[r * wi + source(t, wi)];
        cache.in_shape = x.shape;
        return y;
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>&, const std::string&,
                       bool) const {
        Tensor<T> gx(cache.in_shape);
        const std::size_t rows = gx.dim(0) * gx.dim(1) * gx.dim(2), wi = gx.dim(3);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t t = 0; t < out_width; ++t) gx[r * wi + source(t, wi)] += gy[r * out_width + t];
        return gx;
    }
};

/// Batch normalization over channel axis 1 of [N, C] or [N, C, H, W].
/// Train mode normalizes with (biased) batch statistics; eval mode with the
/// running statistics. Running statistics are updated by the training loop
/// from the tape (momentum 0.9), not inside forward.
struct BatchNorm {
    std::size_t channels = 1;
    double momentum = 0.9;
    double eps = 1e-3;

    Shape output_shape(const Shape& s) const {
        require((s.size() == 2 || s.size() == 4) && s[1] == channels, ErrorKind::shape,
                "batchnorm: expected channel axis of size " + std::to_string(channels) + ", got " + to_string(s));
        return s;
    }
    std::vector<ParamDecl> params() const {
        return {{"gamma", {channels}, Init::ones, 1, true},
                {"beta", {channels}, Init::zeros, 1, true},
                {"running_mean", {channels}, Init::zeros, 1, false},
                {"running_var", {channels}, Init::ones, 1, false}};
    }

    static std::size_t spatial(const Shape& s) { return s.size() == 4 ? s[2] * s[3] : 1; }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>& ps, const std::string& key, Mode mode, Rng&,
                      LayerCache<T>& cache) const {
        output_shape(x.shape);
        const std::size_t n = x.dim(0), sp = spatial(x.shape);
        const T* gamma = ps.value(key + "gamma").ptr();
        const T* beta = ps.value(key + "beta").ptr();
        std::vector<T> mean(channels), var(channels);
        if (mode == Mode::train) {
            const double m = static_cast<double>(n * sp);
            for (std::size_t c = 0; c < channels; ++c) {
                double s = 0.0;
                for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t j = 0; j < sp; ++j) s += x[(b * channels + c) * sp + j];
                const double mu = s / m;
                double v = 0.0;
                for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t j = 0; j < sp; ++j) {
                        const double d = x[(b * channels + c) * sp + j] - mu;
                        v += d * d;
                    }
                mean[c] = static_cast<T>(mu);
                var[c] = static_cast<T>(v / m);
            }
        } else {
            const T* rm = ps.value(key + "running_mean").ptr();
            const T* rv = ps.value(key + "running_var").ptr();
            mean.assign(rm, rm + channels);
            var.assign(rv, rv + channels);
        }
        Tensor<T> xhat(x.shape), y(x.shape);
        for (std::size_t c = 0; c < channels; ++c) {
            const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var[c]) + eps));
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t j = 0; j < sp; ++j) {
                    const std::size_t idx = (b * channels + c) * sp + j;
                    xhat[idx] = (x[idx] - mean[c]) * inv;
                    y[idx] = gamma[c] * xhat[idx] + beta[c];
                }
        }
        cache.aux = std::move(xhat);
        cache.mean = std::move(mean);
        cache.var = std::move(var);
        cache.train = mode == Mode::train;
        return y;
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>& ps,
                       const std::string& key, bool need_gx) const {
        const Tensor<T>& xhat = cache.aux;
        const bool train = cache.train;
        const std::size_t n = gy.dim(0), sp = spatial(gy.shape);
        const T* gamma = ps.value(key + "gamma").ptr();
        T* ggamma = ps.grad(key + "gamma").ptr();
        T* gbeta = ps.grad(key + "beta").ptr();
        Tensor<T> gx;
        if (need_gx) gx = Tensor<T>(gy.shape);
        const double m = static_cast<double>(n * sp);
        for (std::size_t c = 0; c < channels; ++c) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t j = 0; j < sp; ++j) {
                    const std::size_t idx = (b * channels + c) * sp + j;
                    sum_g += gy[idx];
                    sum_gx += static_cast<double>(gy[idx]) * xhat[idx];
                }
            ggamma[c] += static_cast<T>(sum_gx);
            gbeta[c] += static_cast<T>(sum_g);
            if (!need_gx) continue;
            const double inv = 1.0 / std::sqrt(static_cast<double>(cache.var[c]) + eps);
            const double scale = gamma[c] * inv;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t j = 0; j < sp; ++j) {
                    const std::size_t idx = (b * channels + c) * sp + j;
                    if (train) {
                        gx[idx] = static_cast<T>(scale * (gy[idx] - sum_g / m - xhat[idx] * sum_gx / m));
                    } else {
                        gx[idx] = static_cast<T>(scale * gy[idx]);
                    }
                }
        }
        return gx;
    }
};

/// Elementwise activation; softmax acts on rows of a rank-2 input.
struct Activation {
    ActKind kind = ActKind::linear;

    Shape output_shape(const Shape& s) const {
        if (kind == ActKind::softmax) detail::expect_rank(s, 2, "softmax");
        return s;
    }
    std::vector<ParamDecl> params() const { return {}; }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>&, const std::string&, Mode, Rng&,
                      LayerCache<T>& cache) const {
        output_shape(x.shape);
        Tensor<T> y(x.shape);
        switch (kind) {
            case ActKind::linear: y = x; break;
            case ActKind::relu:
                for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
                break;
            case ActKind::elu:
                for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : std::expm1(x[i]);
                break;
            case ActKind::sigmoid:
                for (std::size_t i = 0; i < x.size(); ++i) y[i] = T{1} / (T{1} + std::exp(-x[i]));
                break;
            case ActKind::softmax: {
                const std::size_t n = x.dim(0), k = x.dim(1);
                for (std::size_t b = 0; b < n; ++b) {
                    const T* row = x.ptr() + b * k;
                    const T mx = *std::max_element(row, row + k);
                    T s{0};
                    for (std::size_t j = 0; j < k; ++j) s += (y[b * k + j] = std::exp(row[j] - mx));
                    for (std::size_t j = 0; j < k; ++j) y[b * k + j] /= s;
                }
                break;
            }
        }
        if (kind == ActKind::relu) cache.input = x;
        cache.output = y;
        return y;
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>&, const std::string&,
                       bool) const {
        const Tensor<T>& y = cache.output;
        Tensor<T> gx(gy.shape);
        switch (kind) {
            case ActKind::linear: gx = gy; break;
            case ActKind::relu:
                for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = cache.input[i] > T{0} ? gy[i] : T{0};
                break;
            case ActKind::elu:
                // y > 0 iff x > 0; for x <= 0, dy/dx = exp(x) = y + 1.
                for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = y[i] > T{0} ? gy[i] : gy[i] * (y[i] + T{1});
                break;
            case ActKind::sigmoid:
                for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * y[i] * (T{1} - y[i]);
                break;
            case ActKind::softmax: {
                const std::size_t n = gy.dim(0), k = gy.dim(1);
                for (std::size_t b = 0; b < n; ++b) {
                    T s{0};
                    for (std::size_t j = 0; j < k; ++j) s += gy[b * k + j] * y[b * k + j];
                    for (std::size_t j = 0; j < k; ++j) gx[b * k + j] = y[b * k + j] * (gy[b * k + j] - s);
                }
                break;
            }
        }
        return gx;
    }
};

/// Inverted dropout; identity in eval mode.
struct Dropout {
    double rate = 0.25;

    Shape output_shape(const Shape& s) const {
        require(rate >= 0.0 && rate < 1.0, ErrorKind::precondition, "dropout: rate must lie in [0,1)");
        return s;
    }
    std::vector<ParamDecl> params() const { return {}; }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>&, const std::string&, Mode mode, Rng& rng,
                      LayerCache<T>& cache) const {
        output_shape(x.shape);
        if (mode == Mode::eval || rate == 0.0) {
            cache.aux = Tensor<T>{};
            return x;
        }
        Tensor<T> mask(x.shape);
        const T keep = static_cast<T>(1.0 / (1.0 - rate));
        for (auto& m : mask.data) m = rng.uniform() >= rate ? keep : T{0};
        Tensor<T> y(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
        cache.aux = std::move(mask);
        return y;
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>&, const std::string&,
                       bool) const {
        if (cache.aux.size() == 0) return gy;
        Tensor<T> gx(gy.shape);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * cache.aux[i];
        return gx;
    }
};

/// Reinterprets the non-batch dimensions.
struct Reshape {
    Shape target;  // without the batch dimension

    Shape output_shape(const Shape& s) const {
        require(!s.empty(), ErrorKind::shape, "reshape: empty input shape");
        const Shape tail(s.begin() + 1, s.end());
        require(element_count(tail) == element_count(target), ErrorKind::shape,
                "reshape: cannot view " + to_string(s) + " as [N]+" + to_string(target));
        Shape out{s[0]};
        out.insert(out.end(), target.begin(), target.end());
        return out;
    }
    std::vector<ParamDecl> params() const { return {}; }

    template <class T>
    Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>&, const std::string&, Mode, Rng&,
                      LayerCache<T>& cache) const {
        cache.in_shape = x.shape;
        return Tensor<T>(output_shape(x.shape), x.data);
    }

    template <class T>
    Tensor<T> backward(const Tensor<T>& gy, const LayerCache<T>& cache, ParamStore<T>&, const std::string&,
                       bool) const {
        return Tensor<T>(cache.in_shape, gy.data);
    }
};

using LayerSpec = std::variant<Dense, TemporalConv, DepthwiseSpatialConv, SeparableConv, TransposedTemporalConv,
                               TransposedDepthwiseSpatialConv, TransposedSeparableConv, AvgPool, Upsample,
                               BatchNorm, Activation, Dropout, Reshape>;

inline std::string kind_name(const LayerSpec& spec) {
    static constexpr const char* names[] = {"dense", "conv-temporal", "conv-depthwise-spatial", "conv-separable",
                                            "transposed-conv-temporal", "transposed-conv-depthwise-spatial",
                                            "transposed-conv-separable", "average-pool", "upsample", "batchnorm",
                                            "activation", "dropout", "reshape"};
    return names[spec.index()];
}

}  // namespace eeg2vec::nn
