#include "ourgan/pyramid.hpp"

#include <algorithm>
#include <cmath>

namespace ourgan {

namespace {

constexpr int64_t kMinScaleDim = 8;  // keeps 3x3 convolutions meaningful

int64_t shrink_dim(int64_t dim, double factor) {
    // Round half away from zero; dims are positive so llround does exactly that.
    return std::llround(static_cast<double>(dim) * factor);
}

}  // namespace

PyramidSchedule build_schedule(std::pair<int64_t, int64_t> base_resolution, double scale_factor,
                               int num_vae_scales, int num_gan_scales) {
    check(scale_factor > 0.0 && scale_factor < 1.0, "build_schedule: scale_factor must be in (0,1)");
    check(num_vae_scales >= 0 && num_gan_scales >= 0, "build_schedule: scale counts must be >= 0");
    check(base_resolution.first >= kMinScaleDim && base_resolution.second >= kMinScaleDim,
          "build_schedule: base resolution below 8 px");

    const int num_scales = 1 + num_vae_scales + num_gan_scales;
    std::vector<std::pair<int64_t, int64_t>> resolutions(static_cast<size_t>(num_scales));
    resolutions.back() = base_resolution;
    for (int m = num_scales - 2; m >= 0; --m) {
        const auto& finer = resolutions[static_cast<size_t>(m + 1)];
        resolutions[static_cast<size_t>(m)] = {shrink_dim(finer.first, scale_factor),
                                               shrink_dim(finer.second, scale_factor)};
    }
    const auto& coarsest = resolutions.front();
    check(coarsest.first >= kMinScaleDim && coarsest.second >= kMinScaleDim,
          "build_schedule: coarsest scale falls below 8 px; reduce scale count");

    PyramidSchedule s;
    s.base_resolution = base_resolution;
    s.scale_factor = scale_factor;
    s.num_vae_scales = num_vae_scales;
    s.num_gan_scales = num_gan_scales;
    s.resolutions = std::move(resolutions);
    return s;
}

std::vector<ImageTensor> build_pyramid(const ImageTensor& image, const PyramidSchedule& schedule) {
    check(is_image(image), "build_pyramid: expected a 3xHxW image");
    check(image_height(image) == schedule.base_resolution.first &&
              image_width(image) == schedule.base_resolution.second,
          "build_pyramid: image size does not match the schedule base resolution");

    std::vector<ImageTensor> levels;
    levels.reserve(schedule.resolutions.size());
    for (const auto& [h, w] : schedule.resolutions)
        levels.push_back(resize_spatial(image, h, w, ResampleKernel::Bicubic));
    return levels;
}

ImageTensor upsample(const ImageTensor& image, std::pair<int64_t, int64_t> target) {
    check(is_image(image), "upsample: expected a 3xHxW image");
    check(target.first >= image_height(image) && target.second >= image_width(image),
          "upsample: target smaller than source; use build_pyramid to shrink");
    ImageTensor out = resize_spatial(image, target.first, target.second, ResampleKernel::Bicubic);
    clamp_(out, -1.0f, 1.0f);
    return out;
}

}  // namespace ourgan
