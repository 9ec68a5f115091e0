#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ourgan/autograd.hpp"
#include "ourgan/rng.hpp"
#include "ourgan/tensor.hpp"

namespace ourgan::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor adam_m, adam_v;  // lazily sized by the optimizer
    bool trainable = true;
};

/// Turns Params into graph leaves for one forward pass.
///   Train  — differentiable leaves, bindings recorded for the optimizer;
///   Frozen — non-differentiable leaves (weights of earlier, finished scales);
///   Infer  — constants, nothing recorded; safe for concurrent use.
/// A param bound twice in one pass maps to the same leaf, so gradients from
/// multiple uses (e.g. reconstruction and adversarial paths) accumulate.
class Binder {
public:
    enum class Mode { Train, Frozen, Infer };
    explicit Binder(Mode mode = Mode::Infer) : mode_(mode) {}

    ag::Var bind(const Param& p) {
        auto it = cache_.find(&p);
        if (it != cache_.end()) return it->second;
        ag::Var v = ag::leaf(p.value, mode_ == Mode::Train && p.trainable);
        cache_.emplace(&p, v);
        if (mode_ == Mode::Train) {
            // Training call sites own their modules mutably; the const_cast
            // only forwards that ownership to the optimizer.
            bindings_.emplace_back(const_cast<Param*>(&p), v);
        }
        return v;
    }

    std::vector<std::pair<Param*, ag::Var>>& bindings() { return bindings_; }

private:
    Mode mode_;
    std::vector<std::pair<Param*, ag::Var>> bindings_;
    std::unordered_map<const Param*, ag::Var> cache_;
};

/// Kaiming-normal std for a LeakyReLU(slope) fan-in.
float he_std(int64_t fan_in, float slope);

struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
    Param w, b;

    static Conv2d make(const std::string& name, int in_ch, int out_ch, int ksize, int stride,
                       int pad, Rng& rng, float init_scale = 1.0f, float init_slope = 0.2f);

    ag::Var forward(Binder& bind, const ag::Var& x) const {
        return ag::conv2d(x, bind.bind(w), bind.bind(b), stride, pad);
    }
    void collect(std::vector<Param*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
    int64_t param_count() const { return w.value.numel() + b.value.numel(); }
};

/// Convolution whose input gets the vertical coordinate channel appended;
/// the weight therefore expects feature_in + 1 channels.
struct CoordConv2d {
    Conv2d conv;
    int feature_in = 0;

    static CoordConv2d make(const std::string& name, int in_ch, int out_ch, int ksize,
                            int stride, int pad, Rng& rng, float init_scale = 1.0f);

    ag::Var forward(Binder& bind, const ag::Var& x) const {
        return conv.forward(bind, ag::append_vcoord(x));
    }
    void collect(std::vector<Param*>& out) { conv.collect(out); }
};

struct AdamOptions {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

class Adam {
public:
    explicit Adam(AdamOptions opt) : opt_(opt) {}

    /// Applies one update to every trainable bound param. When max_grad_norm
    /// is positive the global gradient norm across the group is clipped first.
    void step(std::vector<std::pair<Param*, ag::Var>>& bindings, const ag::GradMap& grads,
              float max_grad_norm = 0.0f);

    void set_lr(float lr) { opt_.lr = lr; }
    float lr() const { return opt_.lr; }
    int64_t steps_taken() const { return t_; }

private:
    AdamOptions opt_;
    int64_t t_ = 0;
};

// Loss helpers shared by the training loops.
ag::Var mse_loss(const ag::Var& pred, const Tensor& target);
ag::Var l1_loss(const ag::Var& pred, const Tensor& target);
ag::Var l1_loss(const ag::Var& pred, const ag::Var& target);

/// KL(q || N(0, I)) for a diagonal Gaussian given as spatial mean /
/// log-variance maps, averaged over all elements. Zero when mu = logvar = 0.
ag::Var kl_divergence(const ag::Var& mu, const ag::Var& logvar);

}  // namespace ourgan::nn
