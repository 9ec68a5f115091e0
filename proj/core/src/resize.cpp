#include "ourgan/resize.hpp"

#include <algorithm>
#include <cmath>

namespace ourgan {

namespace {

// Catmull-Rom bicubic (a = -0.5), support 2.
double bicubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::fabs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

double bilinear_weight(double t) {
    t = std::fabs(t);
    return t < 1.0 ? 1.0 - t : 0.0;
}

double kernel_support(ResampleKernel k) {
    switch (k) {
        case ResampleKernel::Nearest: return 0.5;
        case ResampleKernel::Bilinear: return 1.0;
        case ResampleKernel::Bicubic: return 2.0;
    }
    return 2.0;
}

double kernel_eval(ResampleKernel k, double t) {
    switch (k) {
        case ResampleKernel::Nearest: return (t >= -0.5 && t < 0.5) ? 1.0 : 0.0;
        case ResampleKernel::Bilinear: return bilinear_weight(t);
        case ResampleKernel::Bicubic: return bicubic_weight(t);
    }
    return 0.0;
}

}  // namespace

ResizePlan1D make_resize_plan(int64_t src_len, int64_t dst_len, ResampleKernel kernel) {
    check(src_len >= 1 && dst_len >= 1, "resize: lengths must be positive");
    ResizePlan1D plan;
    plan.src_len = src_len;
    plan.dst_len = dst_len;
    plan.offset.resize(static_cast<size_t>(dst_len));
    plan.count.resize(static_cast<size_t>(dst_len));
    plan.weight_begin.resize(static_cast<size_t>(dst_len));

    const double ratio = static_cast<double>(src_len) / static_cast<double>(dst_len);
    // Widen the kernel when minifying so it covers ratio source pixels.
    const double scale = std::max(ratio, 1.0);
    const double support = kernel_support(kernel) * scale;

    for (int64_t o = 0; o < dst_len; ++o) {
        const double centre = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        int64_t lo = static_cast<int64_t>(std::floor(centre - support + 0.5));
        int64_t hi = static_cast<int64_t>(std::floor(centre + support + 0.5));
        lo = std::max<int64_t>(lo, 0);
        hi = std::min<int64_t>(hi, src_len - 1);
        if (hi < lo) {  // degenerate, snap to nearest valid pixel
            lo = hi = std::clamp<int64_t>(static_cast<int64_t>(std::llround(centre)), 0, src_len - 1);
        }
        plan.offset[static_cast<size_t>(o)] = static_cast<int32_t>(lo);
        plan.count[static_cast<size_t>(o)] = static_cast<int32_t>(hi - lo + 1);
        plan.weight_begin[static_cast<size_t>(o)] = static_cast<int64_t>(plan.weight.size());

        double sum = 0.0;
        std::vector<double> w(static_cast<size_t>(hi - lo + 1));
        for (int64_t i = lo; i <= hi; ++i) {
            double t = (static_cast<double>(i) - centre) / scale;
            double v = kernel_eval(kernel, t);
            w[static_cast<size_t>(i - lo)] = v;
            sum += v;
        }
        if (sum == 0.0) {  // kernel straddles no sample; fall back to nearest
            int64_t nearest = std::clamp<int64_t>(static_cast<int64_t>(std::llround(centre)), lo, hi);
            for (auto& v : w) v = 0.0;
            w[static_cast<size_t>(nearest - lo)] = 1.0;
            sum = 1.0;
        }
        for (double v : w) plan.weight.push_back(static_cast<float>(v / sum));
    }
    return plan;
}

namespace {

// Applies `plan` along the H axis of a (planes, H, W) view.
void apply_rows(const float* in, float* out, int64_t planes, int64_t src_h, int64_t w,
                const ResizePlan1D& plan) {
    for (int64_t p = 0; p < planes; ++p) {
        const float* src = in + p * src_h * w;
        float* dst = out + p * plan.dst_len * w;
        for (int64_t o = 0; o < plan.dst_len; ++o) {
            float* drow = dst + o * w;
            std::fill(drow, drow + w, 0.0f);
            const float* wt = plan.weight.data() + plan.weight_begin[static_cast<size_t>(o)];
            const int32_t base = plan.offset[static_cast<size_t>(o)];
            for (int32_t k = 0; k < plan.count[static_cast<size_t>(o)]; ++k) {
                const float* srow = src + (base + k) * w;
                const float f = wt[k];
                for (int64_t x = 0; x < w; ++x) drow[x] += f * srow[x];
            }
        }
    }
}

// Adjoint of apply_rows: scatters dst-grid values back to the src grid.
void apply_rows_adjoint(const float* in, float* out, int64_t planes, int64_t w,
                        const ResizePlan1D& plan) {
    for (int64_t p = 0; p < planes; ++p) {
        const float* src = in + p * plan.dst_len * w;
        float* dst = out + p * plan.src_len * w;
        std::fill(dst, dst + plan.src_len * w, 0.0f);
        for (int64_t o = 0; o < plan.dst_len; ++o) {
            const float* srow = src + o * w;
            const float* wt = plan.weight.data() + plan.weight_begin[static_cast<size_t>(o)];
            const int32_t base = plan.offset[static_cast<size_t>(o)];
            for (int32_t k = 0; k < plan.count[static_cast<size_t>(o)]; ++k) {
                float* drow = dst + (base + k) * w;
                const float f = wt[k];
                for (int64_t x = 0; x < w; ++x) drow[x] += f * srow[x];
            }
        }
    }
}

// Applies `plan` along the W axis of a (planes, H, W) view.
void apply_cols(const float* in, float* out, int64_t planes, int64_t h, int64_t src_w,
                const ResizePlan1D& plan) {
    for (int64_t pr = 0; pr < planes * h; ++pr) {
        const float* srow = in + pr * src_w;
        float* drow = out + pr * plan.dst_len;
        for (int64_t o = 0; o < plan.dst_len; ++o) {
            const float* wt = plan.weight.data() + plan.weight_begin[static_cast<size_t>(o)];
            const int32_t base = plan.offset[static_cast<size_t>(o)];
            float acc = 0.0f;
            for (int32_t k = 0; k < plan.count[static_cast<size_t>(o)]; ++k)
                acc += wt[k] * srow[base + k];
            drow[o] = acc;
        }
    }
}

void apply_cols_adjoint(const float* in, float* out, int64_t planes, int64_t h,
                        const ResizePlan1D& plan) {
    for (int64_t pr = 0; pr < planes * h; ++pr) {
        const float* srow = in + pr * plan.dst_len;
        float* drow = out + pr * plan.src_len;
        std::fill(drow, drow + plan.src_len, 0.0f);
        for (int64_t o = 0; o < plan.dst_len; ++o) {
            const float* wt = plan.weight.data() + plan.weight_begin[static_cast<size_t>(o)];
            const int32_t base = plan.offset[static_cast<size_t>(o)];
            for (int32_t k = 0; k < plan.count[static_cast<size_t>(o)]; ++k)
                drow[base + k] += wt[k] * srow[o];
        }
    }
}

struct SpatialView {
    int64_t planes;  // product of leading dims
    int64_t h;
    int64_t w;
};

SpatialView spatial_view(const Tensor& t) {
    check(t.rank() >= 2, "resize: tensor must have at least 2 dims");
    SpatialView v;
    v.h = t.dim(t.rank() - 2);
    v.w = t.dim(t.rank() - 1);
    v.planes = 1;
    for (size_t i = 0; i + 2 < t.rank(); ++i) v.planes *= t.dim(i);
    return v;
}

std::vector<int64_t> with_spatial(const Tensor& t, int64_t h, int64_t w) {
    std::vector<int64_t> dims = t.dims();
    dims[dims.size() - 2] = h;
    dims[dims.size() - 1] = w;
    return dims;
}

}  // namespace

Tensor resize_spatial(const Tensor& in, int64_t dst_h, int64_t dst_w, ResampleKernel kernel) {
    const SpatialView v = spatial_view(in);
    if (v.h == dst_h && v.w == dst_w) return in;
    const ResizePlan1D ph = make_resize_plan(v.h, dst_h, kernel);
    const ResizePlan1D pw = make_resize_plan(v.w, dst_w, kernel);

    Tensor mid(std::vector<int64_t>{v.planes, dst_h, v.w});
    apply_rows(in.data(), mid.data(), v.planes, v.h, v.w, ph);
    Tensor out(with_spatial(in, dst_h, dst_w));
    apply_cols(mid.data(), out.data(), v.planes, dst_h, v.w, pw);
    return out;
}

Tensor resize_spatial_adjoint(const Tensor& grad_out, int64_t src_h, int64_t src_w,
                              ResampleKernel kernel) {
    const SpatialView v = spatial_view(grad_out);
    if (v.h == src_h && v.w == src_w) return grad_out;
    const ResizePlan1D ph = make_resize_plan(src_h, v.h, kernel);
    const ResizePlan1D pw = make_resize_plan(src_w, v.w, kernel);

    // Reverse order of the forward passes: undo columns, then rows.
    Tensor mid(std::vector<int64_t>{v.planes, v.h, src_w});
    apply_cols_adjoint(grad_out.data(), mid.data(), v.planes, v.h, pw);
    Tensor out(with_spatial(grad_out, src_h, src_w));
    apply_rows_adjoint(mid.data(), out.data(), v.planes, src_w, ph);
    return out;
}

}  // namespace ourgan
