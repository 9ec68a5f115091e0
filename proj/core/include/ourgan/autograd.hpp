#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "ourgan/resize.hpp"
#include "ourgan/tensor.hpp"

namespace ourgan::ag {

struct Node;
using Var = std::shared_ptr<Node>;

/// One vertex of the dynamic computation graph. Values are computed eagerly;
/// `vjp` builds the per-parent gradient contributions as *new graph nodes*,
/// which is what makes second-order terms (the WGAN gradient penalty)
/// expressible: differentiating a gradient is just running backward() on a
/// scalar assembled from gradient nodes.
struct Node {
    Tensor val;
    bool needs_grad = false;
    std::vector<Var> parents;
    // Entries may be nullptr for parents that do not need gradients.
    std::function<std::vector<Var>(const Var& grad)> vjp;
    const char* op = "";
};

Var constant(Tensor v);
Var leaf(Tensor v, bool needs_grad = true);

// Elementwise arithmetic.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var add_scalar(const Var& a, float s);
Var mul_const(const Var& a, Tensor factor);  // factor is treated as a constant
Var square(const Var& a);
Var exp_(const Var& a);
Var tanh_(const Var& a);
Var sqrt_(const Var& a);
Var abs_(const Var& a);
Var softplus(const Var& a);
Var leaky_relu(const Var& a, float slope);
Var clamp(const Var& a, float lo, float hi);

// Reductions / broadcasts.
Var sum(const Var& a);                       // -> scalar {1}
Var mean(const Var& a);                      // -> scalar {1}
Var broadcast(const Var& scalar, std::vector<int64_t> dims);
Var sum_nhw(const Var& a);                   // [N,C,H,W] -> [C]
Var broadcast_channels(const Var& per_channel, std::vector<int64_t> dims);
Var select(const Var& a, int64_t flat_index);  // -> scalar {1}

// Convolution family (NCHW, zero padding). The three ops are closed under
// differentiation: each one's vjp is expressed with the other two.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var conv2d_input_grad(const Var& dy, const Var& w, int stride, int pad,
                      int64_t in_h, int64_t in_w);
Var conv2d_weight_grad(const Var& x, const Var& dy, int64_t kh, int64_t kw,
                       int stride, int pad);

// Channel plumbing.
Var append_vcoord(const Var& x);             // +1 channel: row i -> -1 + 2i/(H-1)
Var slice_channels(const Var& x, int64_t start, int64_t count);
Var embed_channels(const Var& x, int64_t start, int64_t total_channels);
Var concat_channels(const std::vector<Var>& xs);

// Spatial resampling (linear operators; vjp is the exact adjoint).
Var resize(const Var& x, int64_t h, int64_t w, ResampleKernel kernel);
Var resize_adjoint(const Var& g, int64_t src_h, int64_t src_w, ResampleKernel kernel);

/// Gradient lookup for one backward() call, keyed by node identity.
class GradMap {
public:
    Var at(const Var& v) const {
        auto it = grads_.find(v.get());
        return it == grads_.end() ? nullptr : it->second;
    }
    Tensor tensor_at(const Var& v) const;  // zeros of v's shape when absent
    void set(const Var& v, Var g) { grads_[v.get()] = std::move(g); }
    bool contains(const Var& v) const { return grads_.count(v.get()) != 0; }

private:
    std::unordered_map<Node*, Var> grads_;
};

/// Reverse-mode sweep from a scalar root. Returns gradients for every node in
/// the needs_grad subgraph. Gradients are themselves graph nodes and may be
/// differentiated again.
GradMap backward(const Var& root);

/// Vertical coordinate channel value at `row` of a map with `height` rows.
float vcoord_value(int64_t row, int64_t height);

/// The vertical coordinate plane appended by append_vcoord, as a tensor.
Tensor vcoord_plane(int64_t height, int64_t width);

}  // namespace ourgan::ag
