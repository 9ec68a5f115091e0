#pragma once

#include <utility>
#include <vector>

#include "ourgan/resize.hpp"
#include "ourgan/tensor.hpp"

namespace ourgan {

/// Per-scale resolutions of the first-step cascade, coarsest first.
/// Scale 0 is the VAE-from-noise scale; scales 1..num_vae_scales refine with
/// the VAE objective and the remaining scales with the GAN objective.
struct PyramidSchedule {
    std::pair<int64_t, int64_t> base_resolution;  // (height, width)
    double scale_factor = 0.75;
    int num_vae_scales = 0;
    int num_gan_scales = 0;
    std::vector<std::pair<int64_t, int64_t>> resolutions;  // index 0 = coarsest

    int top_scale() const { return static_cast<int>(resolutions.size()) - 1; }  // M
    int last_vae_scale() const { return num_vae_scales; }                       // L
    bool is_gan_scale(int m) const { return m > num_vae_scales; }
};

/// Builds the resolution ladder by repeatedly shrinking the base resolution by
/// scale_factor, finest-to-coarsest, rounding half away from zero per axis.
/// Rejects schedules whose coarsest scale falls below 8 px in either dimension.
PyramidSchedule build_schedule(std::pair<int64_t, int64_t> base_resolution, double scale_factor,
                               int num_vae_scales, int num_gan_scales);

/// Bicubic-downsampled copies of `image` at every schedule resolution,
/// coarsest first. The image must match the schedule's finest resolution.
std::vector<ImageTensor> build_pyramid(const ImageTensor& image, const PyramidSchedule& schedule);

/// Bicubic upsample to `target` (height, width), clamped to [-1, 1].
/// Shrinking is an error; use build_pyramid for the downward direction.
ImageTensor upsample(const ImageTensor& image, std::pair<int64_t, int64_t> target);

}  // namespace ourgan
