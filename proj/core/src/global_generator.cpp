#include "ourgan/global_generator.hpp"

#include <cmath>

namespace ourgan {

namespace {

constexpr float kLeakySlope = 0.2f;

Tensor batch_repeat(const ImageTensor& img, int batch) {
    Tensor out({batch, img.dim(0), img.dim(1), img.dim(2)});
    const int64_t plane = img.numel();
    for (int b = 0; b < batch; ++b)
        std::copy(img.data(), img.data() + plane, out.data() + b * plane);
    return out;
}

ImageTensor unbatch(const Tensor& t, int64_t n = 0) {
    check(t.rank() == 4, "unbatch: expected NCHW");
    ImageTensor out({t.dim(1), t.dim(2), t.dim(3)});
    const int64_t plane = out.numel();
    std::copy(t.data() + n * plane, t.data() + (n + 1) * plane, out.data());
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

ResidualRefiner ResidualRefiner::make(const std::string& name, int in_ch,
                                      const FirstStepConfig& cfg, Rng& rng) {
    ResidualRefiner g;
    const int k = cfg.kernel_size, s = cfg.stride, p = cfg.padding;
    g.head = nn::CoordConv2d::make(name + ".head", in_ch, cfg.channels, k, s, p, rng);
    for (int i = 0; i < cfg.intermediate_layers; ++i)
        g.mid.push_back(nn::CoordConv2d::make(name + ".mid" + std::to_string(i), cfg.channels,
                                              cfg.channels, k, s, p, rng));
    // Small tail init keeps early residuals near zero across the pyramid.
    g.tail = nn::CoordConv2d::make(name + ".tail", cfg.channels, 3, k, s, p, rng, 0.1f);
    return g;
}

ag::Var ResidualRefiner::forward(nn::Binder& bind, const ag::Var& x) const {
    ag::Var h = ag::leaky_relu(head.forward(bind, x), kLeakySlope);
    for (const auto& m : mid) h = ag::leaky_relu(m.forward(bind, h), kLeakySlope);
    return ag::tanh_(tail.forward(bind, h));
}

void ResidualRefiner::collect(std::vector<nn::Param*>& out) {
    head.collect(out);
    for (auto& m : mid) m.collect(out);
    tail.collect(out);
}

LatentEncoder LatentEncoder::make(const FirstStepConfig& cfg, Rng& rng) {
    LatentEncoder e;
    const int k = cfg.kernel_size, s = cfg.stride, p = cfg.padding;
    int in_ch = 3;
    for (int i = 0; i < cfg.encoder_blocks; ++i) {
        e.blocks.push_back(nn::CoordConv2d::make("encoder.block" + std::to_string(i), in_ch,
                                                 cfg.channels, k, s, p, rng));
        in_ch = cfg.channels;
    }
    e.mu_head = nn::CoordConv2d::make("encoder.mu", in_ch, cfg.latent_channels, k, s, p, rng, 0.1f);
    e.logvar_head =
        nn::CoordConv2d::make("encoder.logvar", in_ch, cfg.latent_channels, k, s, p, rng, 0.1f);
    return e;
}

std::pair<ag::Var, ag::Var> LatentEncoder::forward(nn::Binder& bind, const ag::Var& x) const {
    ag::Var h = x;
    for (const auto& b : blocks) h = ag::leaky_relu(b.forward(bind, h), kLeakySlope);
    return {mu_head.forward(bind, h), logvar_head.forward(bind, h)};
}

void LatentEncoder::collect(std::vector<nn::Param*>& out) {
    for (auto& b : blocks) b.collect(out);
    mu_head.collect(out);
    logvar_head.collect(out);
}

PatchCritic PatchCritic::make(const std::string& name, const FirstStepConfig& cfg, Rng& rng) {
    PatchCritic d;
    const int k = cfg.kernel_size, s = cfg.stride, p = cfg.padding;
    d.head = nn::CoordConv2d::make(name + ".head", 3, cfg.channels, k, s, p, rng);
    for (int i = 0; i < cfg.intermediate_layers; ++i)
        d.mid.push_back(nn::CoordConv2d::make(name + ".mid" + std::to_string(i), cfg.channels,
                                              cfg.channels, k, s, p, rng));
    d.tail = nn::CoordConv2d::make(name + ".tail", cfg.channels, 1, k, s, p, rng);
    return d;
}

ag::Var PatchCritic::forward(nn::Binder& bind, const ag::Var& x) const {
    ag::Var h = ag::leaky_relu(head.forward(bind, x), kLeakySlope);
    for (const auto& m : mid) h = ag::leaky_relu(m.forward(bind, h), kLeakySlope);
    return tail.forward(bind, h);  // per-patch score map
}

void PatchCritic::collect(std::vector<nn::Param*>& out) {
    head.collect(out);
    for (auto& m : mid) m.collect(out);
    tail.collect(out);
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

CascadeState make_cascade(const PyramidSchedule& schedule, const FirstStepConfig& config,
                          uint64_t init_seed) {
    check(!schedule.resolutions.empty(), "make_cascade: empty schedule");
    Rng rng(init_seed);
    CascadeState s;
    s.schedule = schedule;
    s.config = config;
    s.encoder = LatentEncoder::make(config, rng);
    const int top = schedule.top_scale();
    for (int m = 0; m <= top; ++m) {
        const int in_ch = m == 0 ? config.latent_channels : 3;
        s.generators.push_back(
            ResidualRefiner::make("g" + std::to_string(m), in_ch, config, rng));
    }
    s.critics.resize(static_cast<size_t>(top) + 1);
    for (int m = schedule.last_vae_scale() + 1; m <= top; ++m)
        s.critics[static_cast<size_t>(m)] = PatchCritic::make("d" + std::to_string(m), config, rng);
    s.noise_amplitudes.assign(static_cast<size_t>(top) + 1, 0.0f);
    return s;
}

CascadeState::CoordAudit CascadeState::audit_coordinate_channels() const {
    CoordAudit audit;
    auto inspect = [&](const nn::CoordConv2d& c) {
        ++audit.total_convs;
        if (c.conv.w.value.dim(1) == c.feature_in + 1) ++audit.coord_convs;
    };
    for (const auto& b : encoder.blocks) inspect(b);
    inspect(encoder.mu_head);
    inspect(encoder.logvar_head);
    for (const auto& g : generators) {
        inspect(g.head);
        for (const auto& m : g.mid) inspect(m);
        inspect(g.tail);
    }
    for (const auto& d : critics) {
        if (d.head.conv.w.value.numel() == 0) continue;
        inspect(d.head);
        for (const auto& m : d.mid) inspect(m);
        inspect(d.tail);
    }
    return audit;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Tensor append_vertical_coords(const Tensor& feature_map) {
    check(feature_map.rank() == 3 || feature_map.rank() == 4,
          "append_vertical_coords: expected CHW or NCHW");
    if (feature_map.rank() == 4)
        return ag::append_vcoord(ag::constant(feature_map))->val;
    Tensor batched = feature_map.reshaped(
        {1, feature_map.dim(0), feature_map.dim(1), feature_map.dim(2)});
    Tensor out = ag::append_vcoord(ag::constant(batched))->val;
    return out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
}

namespace {

struct EncodeResult {
    ag::Var mu, logvar, sample;
};

EncodeResult encode_batched(const CascadeState& state, nn::Binder& bind, const Tensor& x0_batch,
                            const Tensor& eps) {
    auto [mu, logvar] = state.encoder.forward(bind, ag::constant(x0_batch));
    check(all_finite(mu->val) && all_finite(logvar->val),
          "encode: non-finite encoder activations");
    ag::Var std_dev = ag::exp_(ag::scale(logvar, 0.5f));
    ag::Var sample = ag::add(mu, ag::mul(std_dev, ag::constant(eps)));
    return {mu, logvar, sample};
}

LatentCode encode_impl(const CascadeState& state, const ImageTensor& x0, const Tensor& eps) {
    const auto& res0 = state.schedule.resolutions.front();
    check(image_height(x0) == res0.first && image_width(x0) == res0.second,
          "encode: image is not at the scale-0 resolution");
    nn::Binder bind(nn::Binder::Mode::Infer);
    Tensor batched = x0.reshaped({1, 3, x0.dim(1), x0.dim(2)});
    Tensor eps_b = eps.reshaped({1, eps.dim(0), eps.dim(1), eps.dim(2)});
    EncodeResult enc = encode_batched(state, bind, batched, eps_b);
    LatentCode code;
    code.mu = unbatch(enc.mu->val);
    code.logvar = unbatch(enc.logvar->val);
    code.sample = unbatch(enc.sample->val);
    return code;
}

}  // namespace

LatentCode encode(const CascadeState& state, const ImageTensor& x0, Rng& rng) {
    const auto& res0 = state.schedule.resolutions.front();
    Tensor eps =
        rng.normal_tensor({state.config.latent_channels, res0.first, res0.second});
    return encode_impl(state, x0, eps);
}

LatentCode encode_with_eps(const CascadeState& state, const ImageTensor& x0, const Tensor& eps) {
    return encode_impl(state, x0, eps);
}

namespace {

/// Shared cascade walk. binder_of(m) supplies the binder for generator m, so
/// training can mix trainable and frozen scales in one pass.
std::vector<ag::Var> run_scales(const CascadeState& state, const ag::Var& z0,
                                const std::vector<Tensor>& noises, int up_to,
                                const std::function<nn::Binder&(int)>& binder_of) {
    const auto& res = state.schedule.resolutions;
    std::vector<ag::Var> outputs;
    outputs.reserve(static_cast<size_t>(up_to) + 1);
    outputs.push_back(state.generators[0].forward(binder_of(0), z0));
    for (int m = 1; m <= up_to; ++m) {
        ag::Var up = ag::resize(outputs.back(), res[static_cast<size_t>(m)].first,
                                res[static_cast<size_t>(m)].second, ResampleKernel::Bicubic);
        ag::Var gen_in = up;
        if (state.schedule.is_gan_scale(m) && noises.size() > static_cast<size_t>(m) &&
            noises[static_cast<size_t>(m)].numel() > 0) {
            const Tensor& z = noises[static_cast<size_t>(m)];
            check(z.same_shape(up->val),
                  "forward_cascade: noise shape mismatch at scale " + std::to_string(m));
            gen_in = ag::add(up, ag::constant(z));
        }
        outputs.push_back(
            ag::add(up, state.generators[static_cast<size_t>(m)].forward(binder_of(m), gen_in)));
    }
    return outputs;
}

}  // namespace

std::vector<ImageTensor> forward_cascade(const CascadeState& state,
                                         const std::vector<Tensor>& noises) {
    check(!noises.empty(), "forward_cascade: noises[0] (scale-0 latent) is required");
    const auto& res0 = state.schedule.resolutions.front();
    check(noises[0].rank() == 3 && noises[0].dim(0) == state.config.latent_channels &&
              noises[0].dim(1) == res0.first && noises[0].dim(2) == res0.second,
          "forward_cascade: latent shape mismatch");

    nn::Binder bind(nn::Binder::Mode::Infer);
    auto binder_of = [&bind](int) -> nn::Binder& { return bind; };

    Tensor z0 = noises[0].reshaped(
        {1, state.config.latent_channels, res0.first, res0.second});
    std::vector<Tensor> batched_noises(noises.size());
    for (size_t m = 1; m < noises.size(); ++m) {
        if (noises[m].numel() == 0) continue;
        batched_noises[m] =
            noises[m].reshaped({1, noises[m].dim(0), noises[m].dim(1), noises[m].dim(2)});
    }

    auto vars = run_scales(state, ag::constant(z0), batched_noises, state.schedule.top_scale(),
                           binder_of);
    std::vector<ImageTensor> out;
    out.reserve(vars.size());
    for (auto& v : vars) {
        check(all_finite(v->val), "forward_cascade: non-finite activations");
        out.push_back(unbatch(v->val));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

void reset_adam_state(std::vector<nn::Param*>& params) {
    for (auto* p : params) {
        p->adam_m = Tensor();
        p->adam_v = Tensor();
    }
}

/// Critic value: mean of the patch score map.
ag::Var critic_value(const PatchCritic& critic, nn::Binder& bind, const ag::Var& image) {
    return ag::mean(critic.forward(bind, image));
}

/// One-sample WGAN gradient penalty, (||grad_xhat D(xhat)||_2 - 1)^2.
/// The penalty depends on the critic weights through the inner backward pass,
/// so its own backward reaches them as second-order terms.
ag::Var gradient_penalty_sample(const PatchCritic& critic, nn::Binder& bind,
                                const Tensor& real_chw, const Tensor& fake_chw, float mix) {
    Tensor xhat_val({1, real_chw.dim(0), real_chw.dim(1), real_chw.dim(2)});
    for (int64_t i = 0; i < real_chw.numel(); ++i)
        xhat_val[i] = mix * real_chw[i] + (1.0f - mix) * fake_chw[i];
    ag::Var xhat = ag::leaf(std::move(xhat_val), true);
    ag::Var score = critic_value(critic, bind, xhat);
    ag::GradMap inner = ag::backward(score);
    ag::Var gx = inner.at(xhat);
    check(gx != nullptr, "gradient penalty: no input gradient");
    ag::Var norm = ag::sqrt_(ag::add_scalar(ag::sum(ag::square(gx)), 1e-12f));
    return ag::square(ag::add_scalar(norm, -1.0f));
}

struct GanPaths {
    Tensor up_rec;   // upsampled reconstruction at scale m, batched
    Tensor up_fake;  // upsampled free sample at scale m, batched
};

/// Runs the frozen part of the cascade (scales < m) for both the posterior
/// reconstruction path and the prior sampling path. Everything below the
/// current scale is fixed, so this is plain forward computation.
GanPaths frozen_paths_below(const CascadeState& state, const ImageTensor& x0, int m, int batch,
                            Rng& rng) {
    const auto& res = state.schedule.resolutions;
    nn::Binder infer(nn::Binder::Mode::Infer);
    auto binder_of = [&infer](int) -> nn::Binder& { return infer; };
    const auto& res0 = res.front();
    const int lc = state.config.latent_channels;

    // Posterior latent, fresh reparameterization draw per iteration.
    Tensor x0_b = batch_repeat(x0, batch);
    Tensor eps = rng.normal_tensor({batch, lc, res0.first, res0.second});
    EncodeResult enc = encode_batched(state, infer, x0_b, eps);

    // Prior latent and per-scale noise for the sampling path.
    Tensor z_prior = rng.normal_tensor({batch, lc, res0.first, res0.second});
    std::vector<Tensor> fake_noises(static_cast<size_t>(m));
    for (int k = state.schedule.last_vae_scale() + 1; k < m; ++k)
        fake_noises[static_cast<size_t>(k)] =
            rng.normal_tensor({batch, 3, res[static_cast<size_t>(k)].first,
                               res[static_cast<size_t>(k)].second},
                              state.noise_amplitudes[static_cast<size_t>(k)]);

    std::vector<Tensor> empty_noises;
    auto rec_vars = run_scales(state, enc.sample, empty_noises, m - 1, binder_of);
    auto fake_vars = run_scales(state, ag::constant(z_prior), fake_noises, m - 1, binder_of);

    GanPaths paths;
    paths.up_rec = resize_spatial(rec_vars.back()->val, res[static_cast<size_t>(m)].first,
                                  res[static_cast<size_t>(m)].second, ResampleKernel::Bicubic);
    paths.up_fake = resize_spatial(fake_vars.back()->val, res[static_cast<size_t>(m)].first,
                                   res[static_cast<size_t>(m)].second, ResampleKernel::Bicubic);
    return paths;
}

void train_vae_scale(CascadeState& state, const std::vector<ImageTensor>& pyramid, int m,
                     Rng& rng, ScaleTrainStats& stats, const TrainProgressFn& progress) {
    const auto& cfg = state.config;
    const int batch = cfg.batch_size;
    const auto& res0 = state.schedule.resolutions.front();
    Tensor x0_b = batch_repeat(pyramid[0], batch);
    Tensor xm_b = batch_repeat(pyramid[static_cast<size_t>(m)], batch);

    std::vector<nn::Param*> group;
    state.encoder.collect(group);
    state.generators[0].collect(group);
    if (m > 0) state.generators[static_cast<size_t>(m)].collect(group);
    reset_adam_state(group);
    nn::Adam opt({.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2});

    for (int iter = 0; iter < cfg.iterations_per_scale; ++iter) {
        nn::Binder train(nn::Binder::Mode::Train);
        nn::Binder frozen(nn::Binder::Mode::Frozen);
        auto binder_of = [&](int scale) -> nn::Binder& {
            // Algorithm keeps E, G_0 and the current G_m learning during VAE
            // stages; intermediate VAE generators stay frozen.
            return (scale == 0 || scale == m) ? train : frozen;
        };

        Tensor eps = rng.normal_tensor({batch, cfg.latent_channels, res0.first, res0.second});
        EncodeResult enc = encode_batched(state, train, x0_b, eps);
        std::vector<Tensor> no_noise;
        auto outs = run_scales(state, enc.sample, no_noise, m, binder_of);

        ag::Var recon_m = nn::mse_loss(outs.back(), xm_b);
        ag::Var kl = nn::kl_divergence(enc.mu, enc.logvar);
        ag::Var loss;
        if (m == 0) {
            loss = ag::add(ag::scale(recon_m, cfg.weight_recon), ag::scale(kl, cfg.weight_kl));
        } else {
            ag::Var recon_0 = nn::mse_loss(outs.front(), x0_b);
            loss = ag::add(
                ag::add(ag::scale(recon_m, cfg.weight_recon), ag::scale(recon_0, cfg.weight_recon)),
                ag::scale(kl, cfg.weight_kl));
        }
        if (!std::isfinite(loss->val[0]))
            throw Error("train_first_step: divergence at scale " + std::to_string(m));

        ag::GradMap grads = ag::backward(loss);
        opt.step(train.bindings(), grads, cfg.grad_clip);

        stats.recon.push_back(recon_m->val[0]);
        stats.kl.push_back(kl->val[0]);
        if (progress) progress(m, iter, loss->val[0]);
    }
}

void train_gan_scale(CascadeState& state, const std::vector<ImageTensor>& pyramid, int m,
                     Rng& rng, ScaleTrainStats& stats, const TrainProgressFn& progress) {
    const auto& cfg = state.config;
    const int batch = cfg.batch_size;
    const auto& res = state.schedule.resolutions;
    Tensor xm_b = batch_repeat(pyramid[static_cast<size_t>(m)], batch);
    PatchCritic& critic = state.critics[static_cast<size_t>(m)];
    ResidualRefiner& gen = state.generators[static_cast<size_t>(m)];

    // sigma_m: RMSE between the upsampled reconstruction and the real image.
    {
        GanPaths probe = frozen_paths_below(state, pyramid[0], m, 1, rng);
        Tensor xm_1({1, 3, res[static_cast<size_t>(m)].first, res[static_cast<size_t>(m)].second});
        std::copy(pyramid[static_cast<size_t>(m)].data(),
                  pyramid[static_cast<size_t>(m)].data() + xm_1.numel(), xm_1.data());
        state.noise_amplitudes[static_cast<size_t>(m)] =
            static_cast<float>(rmse(probe.up_rec, xm_1));
    }
    stats.noise_amplitude = state.noise_amplitudes[static_cast<size_t>(m)];

    std::vector<nn::Param*> g_group, d_group;
    gen.collect(g_group);
    critic.collect(d_group);
    reset_adam_state(g_group);
    reset_adam_state(d_group);
    nn::Adam g_opt({.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2});
    nn::Adam d_opt({.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2});

    const float sigma = state.noise_amplitudes[static_cast<size_t>(m)];
    const auto [mh, mw] = res[static_cast<size_t>(m)];

    for (int iter = 0; iter < cfg.iterations_per_scale; ++iter) {
        GanPaths paths = frozen_paths_below(state, pyramid[0], m, batch, rng);
        Tensor z_m = rng.normal_tensor({batch, 3, mh, mw}, sigma);

        // --- Critic step: fake detached, WGAN loss with gradient penalty.
        {
            nn::Binder gen_frozen(nn::Binder::Mode::Frozen);
            ag::Var fake_in = ag::add(ag::constant(paths.up_fake), ag::constant(z_m));
            ag::Var fake =
                ag::add(ag::constant(paths.up_fake), gen.forward(gen_frozen, fake_in));

            nn::Binder d_train(nn::Binder::Mode::Train);
            ag::Var d_fake = critic_value(critic, d_train, fake);
            ag::Var d_real = critic_value(critic, d_train, ag::constant(xm_b));
            ag::Var gap = ag::sub(d_fake, d_real);

            ag::Var penalty;
            for (int b = 0; b < batch; ++b) {
                Tensor real_chw = unbatch(xm_b, b);
                Tensor fake_chw = unbatch(fake->val, b);
                float mix = static_cast<float>(rng.uniform());
                ag::Var gp = gradient_penalty_sample(critic, d_train, real_chw, fake_chw, mix);
                penalty = penalty ? ag::add(penalty, gp) : gp;
            }
            penalty = ag::scale(penalty, 1.0f / static_cast<float>(batch));

            ag::Var d_loss = ag::add(gap, ag::scale(penalty, cfg.gp_coefficient));
            if (!std::isfinite(d_loss->val[0]) || !std::isfinite(penalty->val[0]))
                throw Error("train_first_step: critic divergence at scale " + std::to_string(m));
            ag::GradMap grads = ag::backward(d_loss);
            d_opt.step(d_train.bindings(), grads, cfg.grad_clip);

            stats.gp.push_back(penalty->val[0]);
            stats.critic_gap.push_back(gap->val[0]);
        }

        // --- Generator step: weighted reconstruction + adversarial value.
        {
            nn::Binder g_train(nn::Binder::Mode::Train);
            nn::Binder d_frozen(nn::Binder::Mode::Frozen);

            ag::Var up_rec = ag::constant(paths.up_rec);
            ag::Var rec_m = ag::add(up_rec, gen.forward(g_train, up_rec));
            ag::Var recon = nn::mse_loss(rec_m, xm_b);

            ag::Var fake_in = ag::add(ag::constant(paths.up_fake), ag::constant(z_m));
            ag::Var fake = ag::add(ag::constant(paths.up_fake), gen.forward(g_train, fake_in));
            ag::Var adv = ag::scale(critic_value(critic, d_frozen, fake), -1.0f);

            ag::Var loss =
                ag::add(ag::scale(recon, cfg.weight_recon), ag::scale(adv, cfg.weight_adv));
            if (!std::isfinite(loss->val[0]))
                throw Error("train_first_step: generator divergence at scale " +
                            std::to_string(m));
            ag::GradMap grads = ag::backward(loss);
            g_opt.step(g_train.bindings(), grads, cfg.grad_clip);

            stats.recon.push_back(recon->val[0]);
            if (progress) progress(m, iter, loss->val[0]);
        }
    }
}

}  // namespace

FirstStepReport train_first_step(CascadeState& state, const ImageTensor& train_image,
                                 uint64_t seed, const TrainProgressFn& progress) {
    check(is_image(train_image), "train_first_step: expected a 3xHxW image");
    auto pyramid = build_pyramid(train_image, state.schedule);
    Rng rng(seed);

    FirstStepReport report;
    const int top = state.schedule.top_scale();
    for (int m = 0; m <= top; ++m) {
        ScaleTrainStats stats;
        stats.scale = m;
        stats.gan_stage = state.schedule.is_gan_scale(m);
        if (stats.gan_stage)
            train_gan_scale(state, pyramid, m, rng, stats, progress);
        else
            train_vae_scale(state, pyramid, m, rng, stats, progress);
        report.scales.push_back(std::move(stats));
        state.trained_scales = m + 1;
    }

    // Store the posterior mean as the reconstruction latent.
    nn::Binder infer(nn::Binder::Mode::Infer);
    Tensor x0_b = batch_repeat(pyramid[0], 1);
    const auto& res0 = state.schedule.resolutions.front();
    Tensor eps_zero({1, state.config.latent_channels, res0.first, res0.second});
    EncodeResult enc = encode_batched(state, infer, x0_b, eps_zero);
    state.recon_latent = unbatch(enc.mu->val);
    return report;
}

namespace {

ImageTensor cascade_to_image(const CascadeState& state, const std::vector<Tensor>& noises) {
    auto levels = forward_cascade(state, noises);
    ImageTensor out = levels.back();
    clamp_(out, -1.0f, 1.0f);
    return out;
}

}  // namespace

ImageTensor sample(const CascadeState& state, uint64_t seed) {
    check(state.trained(), "sample: cascade is not fully trained");
    Rng rng(seed);
    const auto& res = state.schedule.resolutions;
    std::vector<Tensor> noises(res.size());
    noises[0] = rng.normal_tensor(
        {state.config.latent_channels, res[0].first, res[0].second});
    for (int m = state.schedule.last_vae_scale() + 1; m <= state.schedule.top_scale(); ++m)
        noises[static_cast<size_t>(m)] =
            rng.normal_tensor({3, res[static_cast<size_t>(m)].first,
                               res[static_cast<size_t>(m)].second},
                              state.noise_amplitudes[static_cast<size_t>(m)]);
    return cascade_to_image(state, noises);
}

ImageTensor reconstruct(const CascadeState& state) {
    check(state.trained(), "reconstruct: cascade is not fully trained");
    check(state.recon_latent.numel() > 0, "reconstruct: no stored reconstruction latent");
    std::vector<Tensor> noises(state.schedule.resolutions.size());
    noises[0] = state.recon_latent;
    return cascade_to_image(state, noises);
}

}  // namespace ourgan
