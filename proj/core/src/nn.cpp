#include "ourgan/nn.hpp"

#include <cmath>

namespace ourgan::nn {

float he_std(int64_t fan_in, float slope) {
    return std::sqrt(2.0f / ((1.0f + slope * slope) * static_cast<float>(fan_in)));
}

Conv2d Conv2d::make(const std::string& name, int in_ch, int out_ch, int ksize, int stride,
                    int pad, Rng& rng, float init_scale, float init_slope) {
    Conv2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.ksize = ksize;
    c.stride = stride;
    c.pad = pad;
    const float stddev =
        init_scale * he_std(static_cast<int64_t>(in_ch) * ksize * ksize, init_slope);
    c.w.name = name + ".w";
    c.w.value = rng.normal_tensor({out_ch, in_ch, ksize, ksize}, stddev);
    c.b.name = name + ".b";
    c.b.value = Tensor({out_ch});
    return c;
}

CoordConv2d CoordConv2d::make(const std::string& name, int in_ch, int out_ch, int ksize,
                              int stride, int pad, Rng& rng, float init_scale) {
    CoordConv2d c;
    c.feature_in = in_ch;
    c.conv = Conv2d::make(name, in_ch + 1, out_ch, ksize, stride, pad, rng, init_scale);
    return c;
}

void Adam::step(std::vector<std::pair<Param*, ag::Var>>& bindings, const ag::GradMap& grads,
                float max_grad_norm) {
    struct Entry {
        Param* p;
        Tensor g;
    };
    std::vector<Entry> entries;
    double sq_norm = 0.0;
    for (auto& [param, var] : bindings) {
        if (!param->trainable) continue;
        ag::Var g = grads.at(var);
        if (!g) continue;
        check(all_finite(g->val), "adam: non-finite gradient for " + param->name);
        for (int64_t i = 0; i < g->val.numel(); ++i)
            sq_norm += static_cast<double>(g->val[i]) * static_cast<double>(g->val[i]);
        entries.push_back({param, g->val});
    }
    if (entries.empty()) return;

    float scale = 1.0f;
    if (max_grad_norm > 0.0f) {
        double norm = std::sqrt(sq_norm);
        if (norm > max_grad_norm) scale = static_cast<float>(max_grad_norm / norm);
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(opt_.beta1), static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(opt_.beta2), static_cast<double>(t_));
    const float step_size = opt_.lr * static_cast<float>(std::sqrt(bc2) / bc1);

    for (auto& e : entries) {
        Param& p = *e.p;
        if (p.adam_m.numel() != p.value.numel()) {
            p.adam_m = Tensor(p.value.dims());
            p.adam_v = Tensor(p.value.dims());
        }
        for (int64_t i = 0; i < p.value.numel(); ++i) {
            float g = e.g[i] * scale;
            p.adam_m[i] = opt_.beta1 * p.adam_m[i] + (1.0f - opt_.beta1) * g;
            p.adam_v[i] = opt_.beta2 * p.adam_v[i] + (1.0f - opt_.beta2) * g * g;
            p.value[i] -= step_size * p.adam_m[i] / (std::sqrt(p.adam_v[i]) + opt_.eps);
        }
    }
}

ag::Var mse_loss(const ag::Var& pred, const Tensor& target) {
    return ag::mean(ag::square(ag::sub(pred, ag::constant(target))));
}

ag::Var l1_loss(const ag::Var& pred, const Tensor& target) {
    return ag::mean(ag::abs_(ag::sub(pred, ag::constant(target))));
}

ag::Var l1_loss(const ag::Var& pred, const ag::Var& target) {
    return ag::mean(ag::abs_(ag::sub(pred, target)));
}

ag::Var kl_divergence(const ag::Var& mu, const ag::Var& logvar) {
    // KL(N(mu, sigma^2) || N(0, 1)) = -0.5 * (1 + logvar - mu^2 - exp(logvar))
    ag::Var term = ag::add_scalar(
        ag::sub(ag::sub(logvar, ag::square(mu)), ag::exp_(logvar)), 1.0f);
    return ag::scale(ag::mean(term), -0.5f);
}

}  // namespace ourgan::nn
