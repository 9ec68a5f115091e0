#include <doctest.h>

#include <cmath>

#include "ourgan/global_generator.hpp"
#include "ourgan/rng.hpp"

using namespace ourgan;

namespace {

FirstStepConfig tiny_config() {
    FirstStepConfig cfg;
    cfg.channels = 8;
    cfg.latent_channels = 8;
    cfg.intermediate_layers = 2;
    cfg.batch_size = 1;
    cfg.iterations_per_scale = 4;
    return cfg;
}

ImageTensor smooth_image(Rng& rng, int64_t h, int64_t w) {
    // Low-frequency image: random coarse grid upsampled bicubically.
    ImageTensor coarse = rng.uniform_tensor({3, 8, 8}, -0.8f, 0.8f);
    return upsample(coarse, {h, w});
}

}  // namespace

TEST_CASE("append_vertical_coords exact values") {
    for (int64_t h : {int64_t(1), int64_t(2), int64_t(4), int64_t(7)}) {
        Tensor fm({5, h, 3}, 0.0f);
        Tensor out = append_vertical_coords(fm);
        CHECK(out.dim(0) == 6);
        for (int64_t i = 0; i < h; ++i) {
            float expected = h == 1 ? 0.0f : -1.0f + 2.0f * static_cast<float>(i) /
                                                          static_cast<float>(h - 1);
            for (int64_t j = 0; j < 3; ++j) CHECK(out.at(5, i, j) == expected);
        }
    }
    // H=2 endpoints and H=4 interior values pinned explicitly.
    Tensor f2({1, 2, 2}, 0.0f);
    Tensor o2 = append_vertical_coords(f2);
    CHECK(o2.at(1, 0, 0) == -1.0f);
    CHECK(o2.at(1, 1, 0) == 1.0f);
    Tensor f4({1, 4, 1}, 0.0f);
    Tensor o4 = append_vertical_coords(f4);
    CHECK(o4.at(1, 1, 0) == doctest::Approx(-1.0 / 3.0));
    CHECK(o4.at(1, 2, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("cascade structure: critics only on GAN scales, coord audit clean") {
    PyramidSchedule s = build_schedule({48, 48}, 0.75, 1, 2);
    CascadeState state = make_cascade(s, tiny_config(), 99);
    CHECK(state.generators.size() == 4);
    CHECK(state.critics[0].head.conv.w.value.numel() == 0);
    CHECK(state.critics[1].head.conv.w.value.numel() == 0);
    CHECK(state.critics[2].head.conv.w.value.numel() > 0);
    CHECK(state.critics[3].head.conv.w.value.numel() > 0);

    auto audit = state.audit_coordinate_channels();
    // encoder: 2 blocks + 2 heads; generators: 4 * (1 + 2 + 1); critics: 2 * 4.
    CHECK(audit.total_convs == 4 + 16 + 8);
    CHECK(audit.coord_convs == audit.total_convs);
}

TEST_CASE("encode: reparameterization identity and determinism") {
    Rng rng(3);
    PyramidSchedule s = build_schedule({32, 32}, 0.75, 0, 1);
    FirstStepConfig cfg = tiny_config();
    CascadeState state = make_cascade(s, cfg, 5);
    ImageTensor x0 = smooth_image(rng, s.resolutions[0].first, s.resolutions[0].second);

    Tensor eps_zero({cfg.latent_channels, s.resolutions[0].first, s.resolutions[0].second});
    LatentCode code = encode_with_eps(state, x0, eps_zero);
    CHECK(max_abs_diff(code.sample, code.mu) == 0.0f);

    LatentCode again = encode_with_eps(state, x0, eps_zero);
    CHECK(bitwise_equal(again.mu, code.mu));
    CHECK(bitwise_equal(again.logvar, code.logvar));

    // KL of the emitted code against the standard normal is nonnegative.
    ag::Var kl = nn::kl_divergence(ag::constant(code.mu), ag::constant(code.logvar));
    CHECK(kl->val[0] >= 0.0f);

    ImageTensor wrong = make_image(9, 9);
    CHECK_THROWS_AS(encode_with_eps(state, wrong, eps_zero), Error);
}

TEST_CASE("forward_cascade: shape audit against the schedule") {
    Rng rng(4);
    PyramidSchedule s = build_schedule({40, 52}, 0.75, 1, 2);
    FirstStepConfig cfg = tiny_config();
    CascadeState state = make_cascade(s, cfg, 6);

    std::vector<Tensor> noises(s.resolutions.size());
    noises[0] = rng.normal_tensor(
        {cfg.latent_channels, s.resolutions[0].first, s.resolutions[0].second});
    for (int m = 2; m <= 3; ++m)
        noises[static_cast<size_t>(m)] = rng.normal_tensor(
            {3, s.resolutions[static_cast<size_t>(m)].first,
             s.resolutions[static_cast<size_t>(m)].second},
            0.1f);

    auto levels = forward_cascade(state, noises);
    REQUIRE(levels.size() == s.resolutions.size());
    for (size_t m = 0; m < levels.size(); ++m) {
        CHECK(levels[m].dim(0) == 3);
        CHECK(levels[m].dim(1) == s.resolutions[m].first);
        CHECK(levels[m].dim(2) == s.resolutions[m].second);
    }

    // Wrong noise shape is rejected.
    noises[2] = rng.normal_tensor({3, 5, 5});
    CHECK_THROWS_AS(forward_cascade(state, noises), Error);
}

TEST_CASE("forward_cascade: zero residuals reduce to an upsampling chain") {
    Rng rng(7);
    PyramidSchedule s = build_schedule({40, 40}, 0.75, 1, 1);
    FirstStepConfig cfg = tiny_config();
    CascadeState state = make_cascade(s, cfg, 8);
    // Zero every tail so each generator emits tanh(0) = 0 residuals.
    for (size_t m = 1; m < state.generators.size(); ++m) {
        auto& tail = state.generators[m].tail.conv;
        tail.w.value = Tensor(tail.w.value.dims());
        tail.b.value = Tensor(tail.b.value.dims());
    }

    std::vector<Tensor> noises(s.resolutions.size());
    noises[0] = rng.normal_tensor(
        {cfg.latent_channels, s.resolutions[0].first, s.resolutions[0].second});
    auto levels = forward_cascade(state, noises);

    Tensor expected = levels[0];
    for (size_t m = 1; m < levels.size(); ++m) {
        expected = resize_spatial(expected, s.resolutions[m].first, s.resolutions[m].second,
                                  ResampleKernel::Bicubic);
        CHECK(max_abs_diff(levels[m], expected) < 1e-6f);
    }
}

TEST_CASE("training smoke: losses recorded, freezing respected, sampling works") {
    Rng rng(9);
    PyramidSchedule s = build_schedule({24, 24}, 0.75, 1, 1);
    FirstStepConfig cfg = tiny_config();
    cfg.iterations_per_scale = 6;
    CascadeState state = make_cascade(s, cfg, 10);
    ImageTensor img = smooth_image(rng, 24, 24);

    FirstStepReport report = train_first_step(state, img, 77);
    REQUIRE(report.scales.size() == 3);
    CHECK(state.trained());

    // KL nonnegative on VAE stages; penalty finite on the GAN stage.
    for (float kl : report.scales[0].kl) CHECK(kl >= 0.0f);
    for (float kl : report.scales[1].kl) CHECK(kl >= 0.0f);
    CHECK(report.scales[2].gp.size() == 6);
    for (float gp : report.scales[2].gp) {
        CHECK(std::isfinite(gp));
        CHECK(gp >= 0.0f);
    }
    CHECK(report.scales[2].noise_amplitude > 0.0f);

    // Determinism of sampling.
    ImageTensor a = sample(state, 1234);
    ImageTensor b = sample(state, 1234);
    CHECK(bitwise_equal(a, b));
    ImageTensor c = sample(state, 4321);
    CHECK(max_abs_diff(a, c) > 0.0f);

    // Reconstruction mode produces the right shape.
    ImageTensor rec = reconstruct(state);
    CHECK(image_height(rec) == 24);
    CHECK(image_width(rec) == 24);
}

TEST_CASE("GAN-stage training leaves earlier scales bit-identical") {
    Rng rng(10);
    PyramidSchedule s = build_schedule({20, 20}, 0.75, 1, 1);
    FirstStepConfig cfg = tiny_config();
    cfg.iterations_per_scale = 3;
    CascadeState state = make_cascade(s, cfg, 11);
    ImageTensor img = smooth_image(rng, 20, 20);

    // Snapshot of E, G_0, G_1 weights taken right before the GAN scale runs;
    // the GAN stage must not touch them.
    std::vector<Tensor> snapshot;
    bool snapshot_taken = false;
    auto grab = [&]() {
        std::vector<nn::Param*> params;
        state.encoder.collect(params);
        state.generators[0].collect(params);
        state.generators[1].collect(params);
        std::vector<Tensor> values;
        for (auto* p : params) values.push_back(p->value);
        return values;
    };
    TrainProgressFn hook = [&](int scale, int iter, float) {
        if (scale == 2 && iter == 0 && !snapshot_taken) {
            snapshot = grab();
            snapshot_taken = true;
        }
    };
    train_first_step(state, img, 55, hook);
    REQUIRE(snapshot_taken);

    std::vector<Tensor> after = grab();
    REQUIRE(after.size() == snapshot.size());
    for (size_t i = 0; i < after.size(); ++i) CHECK(bitwise_equal(after[i], snapshot[i]));
}

TEST_CASE("untrained state rejects sampling") {
    PyramidSchedule s = build_schedule({16, 16}, 0.75, 0, 0);
    CascadeState state = make_cascade(s, tiny_config(), 12);
    CHECK_THROWS_AS(sample(state, 1), Error);
}
