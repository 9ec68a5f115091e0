#pragma once

#include <vector>

#include "ourgan/tensor.hpp"

namespace ourgan {

enum class ResampleKernel { Nearest, Bilinear, Bicubic };

/// Precomputed 1-D resampling taps for one axis (src_len -> dst_len).
/// Half-pixel-centre coordinate mapping; when minifying, the kernel support
/// is widened by src/dst so the filter acts as an antialiasing low-pass.
/// Weights are normalized to sum to one, which keeps constants exact and
/// makes the operator's adjoint mass-preserving.
struct ResizePlan1D {
    int64_t src_len = 0;
    int64_t dst_len = 0;
    std::vector<int32_t> offset;   // first source index per output sample
    std::vector<int32_t> count;    // taps per output sample
    std::vector<float> weight;     // flattened, weight[o] starts at weight_begin[o]
    std::vector<int64_t> weight_begin;
};

ResizePlan1D make_resize_plan(int64_t src_len, int64_t dst_len, ResampleKernel kernel);

/// Resample a CHW or NCHW tensor to (dst_h, dst_w) on the trailing two axes.
Tensor resize_spatial(const Tensor& in, int64_t dst_h, int64_t dst_w, ResampleKernel kernel);

/// Adjoint of resize_spatial: maps a gradient at (dst_h, dst_w) back to the
/// source grid (src_h, src_w). resize and resize_adjoint are exact transposes
/// of each other tap-for-tap.
Tensor resize_spatial_adjoint(const Tensor& grad_out, int64_t src_h, int64_t src_w,
                              ResampleKernel kernel);

}  // namespace ourgan
