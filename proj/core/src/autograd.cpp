#include "ourgan/autograd.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <unordered_set>

#include "ourgan/parallel.hpp"

namespace ourgan::ag {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

Var make(Tensor val, std::vector<Var> parents,
         std::function<std::vector<Var>(const Var&)> vjp, const char* op) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->op = op;
    for (const auto& p : parents) {
        if (p && p->needs_grad) {
            n->needs_grad = true;
            break;
        }
    }
    // Only differentiable nodes keep their history; everything upstream of a
    // frozen subgraph is released immediately.
    if (n->needs_grad) {
        n->parents = std::move(parents);
        n->vjp = std::move(vjp);
    }
    return n;
}

Var unary_with_mask(const Var& a, Tensor out, Tensor dmask, const char* op) {
    return make(std::move(out), {a},
                [dmask = std::move(dmask)](const Var& g) -> std::vector<Var> {
                    return {mul_const(g, dmask)};
                },
                op);
}

}  // namespace

float vcoord_value(int64_t row, int64_t height) {
    // Midpoint convention for a single-row map, where the formula is undefined.
    if (height <= 1) return 0.0f;
    return -1.0f + 2.0f * static_cast<float>(row) / static_cast<float>(height - 1);
}

Tensor vcoord_plane(int64_t height, int64_t width) {
    Tensor plane({height, width});
    for (int64_t i = 0; i < height; ++i) {
        float v = vcoord_value(i, height);
        for (int64_t j = 0; j < width; ++j) plane[i * width + j] = v;
    }
    return plane;
}

Var constant(Tensor v) { return leaf(std::move(v), false); }

Var leaf(Tensor v, bool needs_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->needs_grad = needs_grad;
    n->op = needs_grad ? "leaf" : "const";
    return n;
}

Var add(const Var& a, const Var& b) {
    return make(ourgan::add(a->val, b->val), {a, b},
                [](const Var& g) -> std::vector<Var> { return {g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
    return make(ourgan::sub(a->val, b->val), {a, b},
                [](const Var& g) -> std::vector<Var> { return {g, scale(g, -1.0f)}; }, "sub");
}

Var mul(const Var& a, const Var& b) {
    check(a->val.same_shape(b->val), "mul: shape mismatch");
    Tensor out = a->val;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b->val[i];
    return make(std::move(out), {a, b},
                [a, b](const Var& g) -> std::vector<Var> { return {mul(g, b), mul(g, a)}; },
                "mul");
}

Var scale(const Var& a, float s) {
    return make(ourgan::scale(a->val, s), {a},
                [s](const Var& g) -> std::vector<Var> { return {scale(g, s)}; }, "scale");
}

Var add_scalar(const Var& a, float s) {
    Tensor out = a->val;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += s;
    return make(std::move(out), {a},
                [](const Var& g) -> std::vector<Var> { return {g}; }, "add_scalar");
}

Var mul_const(const Var& a, Tensor factor) {
    check(a->val.same_shape(factor), "mul_const: shape mismatch");
    Tensor out = a->val;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= factor[i];
    return make(std::move(out), {a},
                [factor](const Var& g) -> std::vector<Var> { return {mul_const(g, factor)}; },
                "mul_const");
}

Var square(const Var& a) { return mul(a, a); }

Var exp_(const Var& a) {
    Tensor out = a->val;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
    Tensor dmask = out;
    return unary_with_mask(a, std::move(out), std::move(dmask), "exp");
}

Var tanh_(const Var& a) {
    Tensor out = a->val;
    Tensor dmask(out.dims());
    for (int64_t i = 0; i < out.numel(); ++i) {
        float t = std::tanh(out[i]);
        out[i] = t;
        dmask[i] = 1.0f - t * t;
    }
    return unary_with_mask(a, std::move(out), std::move(dmask), "tanh");
}

Var sqrt_(const Var& a) {
    Tensor out = a->val;
    Tensor dmask(out.dims());
    for (int64_t i = 0; i < out.numel(); ++i) {
        float r = std::sqrt(out[i]);
        out[i] = r;
        dmask[i] = r > 0.0f ? 0.5f / r : 0.0f;
    }
    return unary_with_mask(a, std::move(out), std::move(dmask), "sqrt");
}

Var abs_(const Var& a) {
    Tensor out = a->val;
    Tensor dmask(out.dims());
    for (int64_t i = 0; i < out.numel(); ++i) {
        dmask[i] = out[i] >= 0.0f ? 1.0f : -1.0f;
        out[i] = std::fabs(out[i]);
    }
    return unary_with_mask(a, std::move(out), std::move(dmask), "abs");
}

Var softplus(const Var& a) {
    Tensor out = a->val;
    Tensor dmask(out.dims());
    for (int64_t i = 0; i < out.numel(); ++i) {
        float x = out[i];
        out[i] = x > 0.0f ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        dmask[i] = 1.0f / (1.0f + std::exp(-x));
    }
    return unary_with_mask(a, std::move(out), std::move(dmask), "softplus");
}

Var leaky_relu(const Var& a, float slope) {
    Tensor out = a->val;
    Tensor dmask(out.dims());
    for (int64_t i = 0; i < out.numel(); ++i) {
        bool pos = out[i] > 0.0f;
        dmask[i] = pos ? 1.0f : slope;
        if (!pos) out[i] *= slope;
    }
    return unary_with_mask(a, std::move(out), std::move(dmask), "leaky_relu");
}

Var clamp(const Var& a, float lo, float hi) {
    Tensor out = a->val;
    Tensor dmask(out.dims());
    for (int64_t i = 0; i < out.numel(); ++i) {
        bool inside = out[i] > lo && out[i] < hi;
        dmask[i] = inside ? 1.0f : 0.0f;
        out[i] = std::min(hi, std::max(lo, out[i]));
    }
    return unary_with_mask(a, std::move(out), std::move(dmask), "clamp");
}

Var sum(const Var& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a->val.numel(); ++i) s += a->val[i];
    std::vector<int64_t> dims = a->val.dims();
    return make(Tensor::scalar(static_cast<float>(s)), {a},
                [dims](const Var& g) -> std::vector<Var> { return {broadcast(g, dims)}; },
                "sum");
}

Var mean(const Var& a) {
    check(a->val.numel() > 0, "mean: empty tensor");
    return scale(sum(a), 1.0f / static_cast<float>(a->val.numel()));
}

Var broadcast(const Var& scalar, std::vector<int64_t> dims) {
    check(scalar->val.numel() == 1, "broadcast: source must be scalar");
    Tensor out(dims, scalar->val[0]);
    return make(std::move(out), {scalar},
                [](const Var& g) -> std::vector<Var> { return {sum(g)}; }, "broadcast");
}

Var sum_nhw(const Var& a) {
    check(a->val.rank() == 4, "sum_nhw: expects NCHW");
    const auto& d = a->val.dims();
    Tensor out({d[1]});
    for (int64_t n = 0; n < d[0]; ++n)
        for (int64_t c = 0; c < d[1]; ++c) {
            double s = 0.0;
            for (int64_t h = 0; h < d[2]; ++h)
                for (int64_t w = 0; w < d[3]; ++w) s += a->val.at(n, c, h, w);
            out[c] += static_cast<float>(s);
        }
    std::vector<int64_t> dims = d;
    return make(std::move(out), {a},
                [dims](const Var& g) -> std::vector<Var> {
                    return {broadcast_channels(g, dims)};
                },
                "sum_nhw");
}

Var broadcast_channels(const Var& per_channel, std::vector<int64_t> dims) {
    check(dims.size() == 4 && per_channel->val.numel() == dims[1],
          "broadcast_channels: shape mismatch");
    Tensor out(dims);
    for (int64_t n = 0; n < dims[0]; ++n)
        for (int64_t c = 0; c < dims[1]; ++c) {
            float v = per_channel->val[c];
            for (int64_t h = 0; h < dims[2]; ++h)
                for (int64_t w = 0; w < dims[3]; ++w) out.at(n, c, h, w) = v;
        }
    return make(std::move(out), {per_channel},
                [](const Var& g) -> std::vector<Var> { return {sum_nhw(g)}; },
                "broadcast_channels");
}

namespace {

Var scatter_at(const Var& scalar, std::vector<int64_t> dims, int64_t flat_index) {
    Tensor out(dims);
    out[flat_index] = scalar->val[0];
    return make(std::move(out), {scalar},
                [flat_index](const Var& g) -> std::vector<Var> {
                    return {select(g, flat_index)};
                },
                "scatter_at");
}

}  // namespace

Var select(const Var& a, int64_t flat_index) {
    check(flat_index >= 0 && flat_index < a->val.numel(), "select: index out of range");
    std::vector<int64_t> dims = a->val.dims();
    return make(Tensor::scalar(a->val[flat_index]), {a},
                [dims, flat_index](const Var& g) -> std::vector<Var> {
                    return {scatter_at(g, dims, flat_index)};
                },
                "select");
}

// ---------------------------------------------------------------------------
// Convolution kernels (im2col + GEMM)
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
    int64_t n, ci, h, w;
    int64_t co, kh, kw;
    int stride, pad;
    int64_t oh, ow;
};

ConvDims conv_dims(const Tensor& x, int64_t co, int64_t kh, int64_t kw, int stride, int pad) {
    check(x.rank() == 4, "conv2d: input must be NCHW");
    ConvDims d;
    d.n = x.dim(0);
    d.ci = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.co = co;
    d.kh = kh;
    d.kw = kw;
    d.stride = stride;
    d.pad = pad;
    d.oh = (d.h + 2 * pad - kh) / stride + 1;
    d.ow = (d.w + 2 * pad - kw) / stride + 1;
    check(d.oh >= 1 && d.ow >= 1, "conv2d: kernel larger than padded input");
    return d;
}

void im2col(const float* x, const ConvDims& d, float* col) {
    // col is [ci*kh*kw, oh*ow] for one sample.
    const int64_t plane = d.h * d.w;
    for (int64_t c = 0; c < d.ci; ++c) {
        for (int64_t u = 0; u < d.kh; ++u) {
            for (int64_t v = 0; v < d.kw; ++v) {
                float* row = col + ((c * d.kh + u) * d.kw + v) * d.oh * d.ow;
                for (int64_t oh = 0; oh < d.oh; ++oh) {
                    int64_t ih = oh * d.stride - d.pad + u;
                    float* dst = row + oh * d.ow;
                    if (ih < 0 || ih >= d.h) {
                        std::fill(dst, dst + d.ow, 0.0f);
                        continue;
                    }
                    const float* src = x + c * plane + ih * d.w;
                    for (int64_t ow = 0; ow < d.ow; ++ow) {
                        int64_t iw = ow * d.stride - d.pad + v;
                        dst[ow] = (iw >= 0 && iw < d.w) ? src[iw] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const float* col, const ConvDims& d, float* x) {
    const int64_t plane = d.h * d.w;
    std::fill(x, x + d.ci * plane, 0.0f);
    for (int64_t c = 0; c < d.ci; ++c) {
        for (int64_t u = 0; u < d.kh; ++u) {
            for (int64_t v = 0; v < d.kw; ++v) {
                const float* row = col + ((c * d.kh + u) * d.kw + v) * d.oh * d.ow;
                for (int64_t oh = 0; oh < d.oh; ++oh) {
                    int64_t ih = oh * d.stride - d.pad + u;
                    if (ih < 0 || ih >= d.h) continue;
                    const float* src = row + oh * d.ow;
                    float* dst = x + c * plane + ih * d.w;
                    for (int64_t ow = 0; ow < d.ow; ++ow) {
                        int64_t iw = ow * d.stride - d.pad + v;
                        if (iw >= 0 && iw < d.w) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

Tensor conv_forward_value(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad) {
    check(w.rank() == 4, "conv2d: weight must be [co,ci,kh,kw]");
    check(w.dim(1) == x.dim(1),
          "conv2d: channel mismatch, weight expects " + std::to_string(w.dim(1)) +
              " input channels, got " + std::to_string(x.dim(1)));
    const ConvDims d = conv_dims(x, w.dim(0), w.dim(2), w.dim(3), stride, pad);
    Tensor y({d.n, d.co, d.oh, d.ow});
    const int64_t ckk = d.ci * d.kh * d.kw;
    parallel_for(d.n, [&](int64_t n) {
        std::vector<float> col(static_cast<size_t>(ckk * d.oh * d.ow));
        im2col(x.data() + n * d.ci * d.h * d.w, d, col.data());
        MapConstMat wm(w.data(), d.co, ckk);
        MapConstMat cm(col.data(), ckk, d.oh * d.ow);
        MapMat ym(y.data() + n * d.co * d.oh * d.ow, d.co, d.oh * d.ow);
        ym.noalias() = wm * cm;
    });
    if (b != nullptr) {
        check(b->numel() == d.co, "conv2d: bias size mismatch");
        for (int64_t n = 0; n < d.n; ++n)
            for (int64_t c = 0; c < d.co; ++c) {
                float bias = (*b)[c];
                float* p = y.data() + (n * d.co + c) * d.oh * d.ow;
                for (int64_t i = 0; i < d.oh * d.ow; ++i) p[i] += bias;
            }
    }
    return y;
}

Tensor conv_input_grad_value(const Tensor& dy, const Tensor& w, int stride, int pad,
                             int64_t in_h, int64_t in_w) {
    Tensor probe({dy.dim(0), w.dim(1), in_h, in_w});
    const ConvDims d = conv_dims(probe, w.dim(0), w.dim(2), w.dim(3), stride, pad);
    check(dy.dim(1) == d.co && dy.dim(2) == d.oh && dy.dim(3) == d.ow,
          "conv2d_input_grad: dy shape inconsistent with weights and input size");
    Tensor dx({d.n, d.ci, in_h, in_w});
    const int64_t ckk = d.ci * d.kh * d.kw;
    parallel_for(d.n, [&](int64_t n) {
        std::vector<float> col(static_cast<size_t>(ckk * d.oh * d.ow));
        MapConstMat wm(w.data(), d.co, ckk);
        MapConstMat dym(dy.data() + n * d.co * d.oh * d.ow, d.co, d.oh * d.ow);
        MapMat cm(col.data(), ckk, d.oh * d.ow);
        cm.noalias() = wm.transpose() * dym;
        col2im(col.data(), d, dx.data() + n * d.ci * in_h * in_w);
    });
    return dx;
}

Tensor conv_weight_grad_value(const Tensor& x, const Tensor& dy, int64_t kh, int64_t kw,
                              int stride, int pad) {
    const ConvDims d = conv_dims(x, dy.dim(1), kh, kw, stride, pad);
    check(dy.dim(0) == d.n && dy.dim(2) == d.oh && dy.dim(3) == d.ow,
          "conv2d_weight_grad: dy shape inconsistent with input");
    const int64_t ckk = d.ci * kh * kw;
    std::vector<Tensor> partial(static_cast<size_t>(d.n));
    parallel_for(d.n, [&](int64_t n) {
        std::vector<float> col(static_cast<size_t>(ckk * d.oh * d.ow));
        im2col(x.data() + n * d.ci * d.h * d.w, d, col.data());
        Tensor dw({d.co, d.ci, kh, kw});
        MapConstMat dym(dy.data() + n * d.co * d.oh * d.ow, d.co, d.oh * d.ow);
        MapConstMat cm(col.data(), ckk, d.oh * d.ow);
        MapMat dwm(dw.data(), d.co, ckk);
        dwm.noalias() = dym * cm.transpose();
        partial[static_cast<size_t>(n)] = std::move(dw);
    });
    Tensor dw = std::move(partial[0]);
    for (int64_t n = 1; n < d.n; ++n) dw = ourgan::add(dw, partial[static_cast<size_t>(n)]);
    return dw;
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    Tensor y = conv_forward_value(x->val, w->val, b ? &b->val : nullptr, stride, pad);
    const int64_t kh = w->val.dim(2), kw = w->val.dim(3);
    const int64_t in_h = x->val.dim(2), in_w = x->val.dim(3);
    std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    // Skip the GEMMs for parents that do not need gradients; probing a frozen
    // network then costs one forward plus one input-grad pass.
    return make(std::move(y), std::move(parents),
                [x, w, has_bias = static_cast<bool>(b), stride, pad, kh, kw, in_h,
                 in_w](const Var& g) -> std::vector<Var> {
                    std::vector<Var> out;
                    out.push_back(x->needs_grad
                                      ? conv2d_input_grad(g, w, stride, pad, in_h, in_w)
                                      : nullptr);
                    out.push_back(w->needs_grad
                                      ? conv2d_weight_grad(x, g, kh, kw, stride, pad)
                                      : nullptr);
                    if (has_bias) out.push_back(sum_nhw(g));
                    return out;
                },
                "conv2d");
}

Var conv2d_input_grad(const Var& dy, const Var& w, int stride, int pad, int64_t in_h,
                      int64_t in_w) {
    Tensor dx = conv_input_grad_value(dy->val, w->val, stride, pad, in_h, in_w);
    const int64_t kh = w->val.dim(2), kw = w->val.dim(3);
    return make(std::move(dx), {dy, w},
                [dy, w, stride, pad, kh, kw](const Var& g) -> std::vector<Var> {
                    return {dy->needs_grad ? conv2d(g, w, nullptr, stride, pad) : nullptr,
                            w->needs_grad ? conv2d_weight_grad(g, dy, kh, kw, stride, pad)
                                          : nullptr};
                },
                "conv2d_input_grad");
}

Var conv2d_weight_grad(const Var& x, const Var& dy, int64_t kh, int64_t kw, int stride,
                       int pad) {
    Tensor dw = conv_weight_grad_value(x->val, dy->val, kh, kw, stride, pad);
    const int64_t in_h = x->val.dim(2), in_w = x->val.dim(3);
    return make(std::move(dw), {x, dy},
                [x, dy, stride, pad, in_h, in_w](const Var& g) -> std::vector<Var> {
                    return {x->needs_grad
                                ? conv2d_input_grad(dy, g, stride, pad, in_h, in_w)
                                : nullptr,
                            dy->needs_grad ? conv2d(x, g, nullptr, stride, pad) : nullptr};
                },
                "conv2d_weight_grad");
}

// ---------------------------------------------------------------------------
// Channel plumbing
// ---------------------------------------------------------------------------

Var append_vcoord(const Var& x) {
    check(x->val.rank() == 4, "append_vcoord: expects NCHW");
    const auto& d = x->val.dims();
    const int64_t n = d[0], c = d[1], h = d[2], w = d[3];
    Tensor plane = vcoord_plane(h, w);
    Tensor out({n, c + 1, h, w});
    const int64_t plane_sz = h * w;
    for (int64_t i = 0; i < n; ++i) {
        std::copy(x->val.data() + i * c * plane_sz, x->val.data() + (i + 1) * c * plane_sz,
                  out.data() + i * (c + 1) * plane_sz);
        std::copy(plane.data(), plane.data() + plane_sz,
                  out.data() + (i * (c + 1) + c) * plane_sz);
    }
    return make(std::move(out), {x},
                [c](const Var& g) -> std::vector<Var> { return {slice_channels(g, 0, c)}; },
                "append_vcoord");
}

Var slice_channels(const Var& x, int64_t start, int64_t count) {
    check(x->val.rank() == 4 && start >= 0 && count >= 1 && start + count <= x->val.dim(1),
          "slice_channels: bad channel range");
    const auto& d = x->val.dims();
    const int64_t n = d[0], c = d[1], plane = d[2] * d[3];
    Tensor out({n, count, d[2], d[3]});
    for (int64_t i = 0; i < n; ++i)
        std::copy(x->val.data() + (i * c + start) * plane,
                  x->val.data() + (i * c + start + count) * plane,
                  out.data() + i * count * plane);
    return make(std::move(out), {x},
                [start, c](const Var& g) -> std::vector<Var> {
                    return {embed_channels(g, start, c)};
                },
                "slice_channels");
}

Var embed_channels(const Var& x, int64_t start, int64_t total_channels) {
    check(x->val.rank() == 4 && start >= 0 && start + x->val.dim(1) <= total_channels,
          "embed_channels: bad channel range");
    const auto& d = x->val.dims();
    const int64_t n = d[0], c = d[1], plane = d[2] * d[3];
    Tensor out({n, total_channels, d[2], d[3]});
    for (int64_t i = 0; i < n; ++i)
        std::copy(x->val.data() + i * c * plane, x->val.data() + (i + 1) * c * plane,
                  out.data() + (i * total_channels + start) * plane);
    return make(std::move(out), {x},
                [start, c](const Var& g) -> std::vector<Var> {
                    return {slice_channels(g, start, c)};
                },
                "embed_channels");
}

Var concat_channels(const std::vector<Var>& xs) {
    check(!xs.empty(), "concat_channels: empty input list");
    const auto& d0 = xs.front()->val.dims();
    check(d0.size() == 4, "concat_channels: expects NCHW");
    int64_t total = 0;
    for (const auto& x : xs) {
        check(x->val.rank() == 4 && x->val.dim(0) == d0[0] && x->val.dim(2) == d0[2] &&
                  x->val.dim(3) == d0[3],
              "concat_channels: shape mismatch");
        total += x->val.dim(1);
    }
    const int64_t n = d0[0], plane = d0[2] * d0[3];
    Tensor out({n, total, d0[2], d0[3]});
    std::vector<int64_t> starts;
    int64_t offset = 0;
    for (const auto& x : xs) {
        const int64_t c = x->val.dim(1);
        starts.push_back(offset);
        for (int64_t i = 0; i < n; ++i)
            std::copy(x->val.data() + i * c * plane, x->val.data() + (i + 1) * c * plane,
                      out.data() + (i * total + offset) * plane);
        offset += c;
    }
    std::vector<Var> parents = xs;
    std::vector<int64_t> counts;
    for (const auto& x : xs) counts.push_back(x->val.dim(1));
    return make(std::move(out), std::move(parents),
                [starts, counts, parents = xs](const Var& g) -> std::vector<Var> {
                    std::vector<Var> out_grads;
                    for (size_t i = 0; i < starts.size(); ++i)
                        out_grads.push_back(parents[i]->needs_grad
                                                ? slice_channels(g, starts[i], counts[i])
                                                : nullptr);
                    return out_grads;
                },
                "concat_channels");
}

Var resize(const Var& x, int64_t h, int64_t w, ResampleKernel kernel) {
    const int64_t sh = x->val.dim(x->val.rank() - 2);
    const int64_t sw = x->val.dim(x->val.rank() - 1);
    Tensor out = resize_spatial(x->val, h, w, kernel);
    return make(std::move(out), {x},
                [sh, sw, kernel](const Var& g) -> std::vector<Var> {
                    return {resize_adjoint(g, sh, sw, kernel)};
                },
                "resize");
}

Var resize_adjoint(const Var& g, int64_t src_h, int64_t src_w, ResampleKernel kernel) {
    const int64_t dh = g->val.dim(g->val.rank() - 2);
    const int64_t dw = g->val.dim(g->val.rank() - 1);
    Tensor out = resize_spatial_adjoint(g->val, src_h, src_w, kernel);
    return make(std::move(out), {g},
                [dh, dw, kernel](const Var& gg) -> std::vector<Var> {
                    return {resize(gg, dh, dw, kernel)};
                },
                "resize_adjoint");
}

// ---------------------------------------------------------------------------
// Backward sweep
// ---------------------------------------------------------------------------

Tensor GradMap::tensor_at(const Var& v) const {
    Var g = at(v);
    return g ? g->val : Tensor(v->val.dims());
}

GradMap backward(const Var& root) {
    check(root != nullptr && root->val.numel() == 1, "backward: root must be a scalar node");
    // Deterministic post-order over the needs_grad subgraph.
    std::vector<Var> order;
    std::unordered_set<Node*> seen;
    struct Frame {
        Var node;
        size_t next_parent = 0;
    };
    std::vector<Frame> stack;
    if (root->needs_grad) stack.push_back({root});
    seen.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Var p = f.node->parents[f.next_parent++];
            if (p && p->needs_grad && seen.insert(p.get()).second) stack.push_back({p});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    GradMap grads;
    if (order.empty()) return grads;
    grads.set(root, constant(Tensor::scalar(1.0f)));

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Var& node = *it;
        Var g = grads.at(node);
        if (!g || !node->vjp) continue;
        std::vector<Var> contribs = node->vjp(g);
        check(contribs.size() == node->parents.size(),
              "backward: vjp arity mismatch in op " + std::string(node->op));
        for (size_t i = 0; i < contribs.size(); ++i) {
            const Var& parent = node->parents[i];
            if (!parent || !parent->needs_grad || !contribs[i]) continue;
            Var existing = grads.at(parent);
            grads.set(parent, existing ? add(existing, contribs[i]) : contribs[i]);
        }
    }
    return grads;
}

}  // namespace ourgan::ag
