#include <doctest.h>

#include <cmath>

#include "ourgan/pyramid.hpp"
#include "ourgan/rng.hpp"

using namespace ourgan;

namespace {

// Independent schedule oracle: shrink per axis with round-half-away-from-zero,
// finest first, then compare coarsest-first.
std::vector<std::pair<int64_t, int64_t>> schedule_oracle(std::pair<int64_t, int64_t> base,
                                                         double factor, int scales_above_base) {
    std::vector<std::pair<int64_t, int64_t>> out{base};
    for (int i = 0; i < scales_above_base; ++i) {
        auto [h, w] = out.back();
        auto rnd = [&](int64_t d) {
            double v = static_cast<double>(d) * factor;
            return static_cast<int64_t>(std::floor(v + 0.5));
        };
        out.emplace_back(rnd(h), rnd(w));
    }
    std::reverse(out.begin(), out.end());
    return out;
}

ImageTensor random_image(Rng& rng, int64_t h, int64_t w) {
    ImageTensor img = rng.uniform_tensor({3, h, w}, -1.0f, 1.0f);
    return img;
}

}  // namespace

TEST_CASE("build_schedule reproduces the full-size ladder") {
    PyramidSchedule s = build_schedule({135, 256}, 0.75, 3, 6);
    CHECK(s.resolutions.size() == 10);  // 1 + 3 + 6 generators
    CHECK(s.top_scale() == 9);
    CHECK(s.last_vae_scale() == 3);
    CHECK(s.resolutions.back() == std::pair<int64_t, int64_t>{135, 256});

    auto expected = schedule_oracle({135, 256}, 0.75, 9);
    REQUIRE(expected.size() == s.resolutions.size());
    for (size_t i = 0; i < expected.size(); ++i) CHECK(s.resolutions[i] == expected[i]);

    // Strictly increasing in both dimensions.
    for (size_t i = 1; i < s.resolutions.size(); ++i) {
        CHECK(s.resolutions[i].first > s.resolutions[i - 1].first);
        CHECK(s.resolutions[i].second > s.resolutions[i - 1].second);
    }
}

TEST_CASE("build_schedule edge cases and errors") {
    PyramidSchedule single = build_schedule({64, 64}, 0.75, 0, 0);
    CHECK(single.resolutions.size() == 1);
    CHECK(single.resolutions[0] == std::pair<int64_t, int64_t>{64, 64});

    CHECK_THROWS_AS(build_schedule({64, 64}, 1.5, 1, 1), Error);
    CHECK_THROWS_AS(build_schedule({64, 64}, 0.75, -1, 0), Error);
    CHECK_THROWS_AS(build_schedule({4, 64}, 0.75, 0, 0), Error);
    // 64 * 0.75^8 < 8: coarsest scale would drop below the minimum.
    CHECK_THROWS_AS(build_schedule({64, 64}, 0.75, 4, 4), Error);
}

TEST_CASE("schedule determinism") {
    PyramidSchedule a = build_schedule({135, 256}, 0.75, 3, 6);
    PyramidSchedule b = build_schedule({135, 256}, 0.75, 3, 6);
    CHECK(a.resolutions == b.resolutions);
}

TEST_CASE("build_pyramid shapes, identity and constants") {
    Rng rng(5);
    PyramidSchedule single = build_schedule({64, 64}, 0.75, 0, 0);
    ImageTensor img = random_image(rng, 64, 64);
    auto levels = build_pyramid(img, single);
    REQUIRE(levels.size() == 1);
    CHECK(max_abs_diff(levels[0], img) == 0.0f);

    PyramidSchedule s = build_schedule({135, 256}, 0.75, 3, 6);
    ImageTensor constant = make_image(135, 256, 0.25f);
    auto const_levels = build_pyramid(constant, s);
    for (size_t m = 0; m < const_levels.size(); ++m) {
        CHECK(image_height(const_levels[m]) == s.resolutions[m].first);
        CHECK(image_width(const_levels[m]) == s.resolutions[m].second);
        for (int64_t i = 0; i < const_levels[m].numel(); ++i)
            CHECK(const_levels[m][i] == doctest::Approx(0.25f).epsilon(1e-6));
    }

    ImageTensor wrong = make_image(64, 64);
    CHECK_THROWS_AS(build_pyramid(wrong, s), Error);
}

TEST_CASE("build_pyramid approximately preserves the mean at every level") {
    Rng rng(6);
    PyramidSchedule s = build_schedule({135, 256}, 0.75, 3, 6);
    ImageTensor img = random_image(rng, 135, 256);
    const float base_mean = mean_value(img);
    auto levels = build_pyramid(img, s);
    for (const auto& level : levels)
        CHECK(std::fabs(mean_value(level) - base_mean) < 0.02f);
}

TEST_CASE("upsample contract") {
    Rng rng(7);
    ImageTensor img = random_image(rng, 20, 30);

    ImageTensor same = upsample(img, {20, 30});
    CHECK(max_abs_diff(same, img) == 0.0f);

    ImageTensor constant = make_image(12, 12, -0.4f);
    ImageTensor up = upsample(constant, {25, 31});
    for (int64_t i = 0; i < up.numel(); ++i) CHECK(up[i] == doctest::Approx(-0.4f).epsilon(1e-6));

    CHECK_THROWS_AS(upsample(img, {10, 30}), Error);

    // Values stay clamped even when the interpolant overshoots.
    ImageTensor spik = make_image(8, 8, 1.0f);
    spik.at(0, 4, 4) = -1.0f;
    ImageTensor up2 = upsample(spik, {17, 17});
    for (int64_t i = 0; i < up2.numel(); ++i) {
        CHECK(up2[i] <= 1.0f);
        CHECK(up2[i] >= -1.0f);
    }
}

TEST_CASE("round trip information loss shrinks as the level approaches the top") {
    Rng rng(8);
    PyramidSchedule s = build_schedule({96, 96}, 0.75, 2, 3);
    // Smooth random image: random pixels low-passed by one down/up cycle so the
    // comparison is not dominated by unrecoverable pixel noise.
    ImageTensor noise = random_image(rng, 96, 96);
    ImageTensor img = upsample(build_pyramid(noise, s)[3], {96, 96});

    auto levels = build_pyramid(img, s);
    double prev_err = 1e9;
    for (int m = 0; m + 1 < static_cast<int>(levels.size()); ++m) {
        ImageTensor back = upsample(levels[static_cast<size_t>(m)], {96, 96});
        double err = rmse(back, img);
        CHECK(err < prev_err);
        prev_err = err;
    }
}
