#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ourgan/nn.hpp"
#include "ourgan/pyramid.hpp"
#include "ourgan/rng.hpp"
#include "ourgan/tensor.hpp"

namespace ourgan {

/// Hyperparameters of the first framework step. Defaults are the full-size
/// values; tests and the desk profile shrink channels and iteration counts.
struct FirstStepConfig {
    int iterations_per_scale = 5000;
    int intermediate_layers = 5;
    int channels = 64;
    int latent_channels = 64;  // spatial latent width at scale 0
    int encoder_blocks = 2;
    int kernel_size = 3;
    int stride = 1;
    int padding = 1;
    int batch_size = 2;  // independent noise draws per iteration
    float lr = 5e-4f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    float grad_clip = 5.0f;
    float weight_recon = 10.0f;
    float weight_kl = 1.0f;
    float weight_adv = 1.0f;
    float gp_coefficient = 10.0f;
};

/// Residual refiner G_m: head + n intermediate 3x3 convs + tanh tail, every
/// convolution fed through the vertical coordinate channel.
struct ResidualRefiner {
    nn::CoordConv2d head;
    std::vector<nn::CoordConv2d> mid;
    nn::CoordConv2d tail;

    static ResidualRefiner make(const std::string& name, int in_ch, const FirstStepConfig& cfg,
                                Rng& rng);
    ag::Var forward(nn::Binder& bind, const ag::Var& x) const;
    void collect(std::vector<nn::Param*>& out);
};

/// Two-block encoder emitting spatial mean / log-variance maps at scale 0.
struct LatentEncoder {
    std::vector<nn::CoordConv2d> blocks;
    nn::CoordConv2d mu_head;
    nn::CoordConv2d logvar_head;

    static LatentEncoder make(const FirstStepConfig& cfg, Rng& rng);
    std::pair<ag::Var, ag::Var> forward(nn::Binder& bind, const ag::Var& x) const;
    void collect(std::vector<nn::Param*>& out);
};

/// Patch critic for the WGAN-GP stages; emits a per-patch score map whose
/// mean is the critic value.
struct PatchCritic {
    nn::CoordConv2d head;
    std::vector<nn::CoordConv2d> mid;
    nn::CoordConv2d tail;

    static PatchCritic make(const std::string& name, const FirstStepConfig& cfg, Rng& rng);
    ag::Var forward(nn::Binder& bind, const ag::Var& x) const;
    void collect(std::vector<nn::Param*>& out);
};

struct LatentCode {
    Tensor mu;      // [latent_ch, h0, w0]
    Tensor logvar;  // same shape
    Tensor sample;  // mu + exp(logvar / 2) * eps
};

/// All networks and noise statistics of the first step.
struct CascadeState {
    PyramidSchedule schedule;
    FirstStepConfig config;
    LatentEncoder encoder;
    std::vector<ResidualRefiner> generators;  // index m in [0, M]
    std::vector<PatchCritic> critics;         // index m; populated for m > L
    std::vector<float> noise_amplitudes;      // sigma_m; zero for VAE scales
    Tensor recon_latent;                      // stored z_0 for reconstruction mode
    int trained_scales = 0;                   // scales m < trained_scales are done

    bool trained() const {
        return trained_scales == static_cast<int>(schedule.resolutions.size());
    }
    /// Shape audit backing the no-horizontal-channel guarantee: every conv in
    /// every network consumes exactly one appended coordinate channel.
    struct CoordAudit {
        int total_convs = 0;
        int coord_convs = 0;  // convs whose weight expects feature_ch + 1 inputs
    };
    CoordAudit audit_coordinate_channels() const;
};

CascadeState make_cascade(const PyramidSchedule& schedule, const FirstStepConfig& config,
                          uint64_t init_seed);

/// Appends the normalized vertical coordinate channel (row i of an H-row map
/// gets -1 + 2i/(H-1); a single-row map gets 0). Accepts CHW or NCHW.
Tensor append_vertical_coords(const Tensor& feature_map);

/// Posterior latent for the scale-0 image. The eps overload fixes the
/// reparameterization noise; eps = 0 gives sample == mu.
LatentCode encode(const CascadeState& state, const ImageTensor& x0, Rng& rng);
LatentCode encode_with_eps(const CascadeState& state, const ImageTensor& x0, const Tensor& eps);

/// Runs the generation cascade. noises[0] is the scale-0 latent sample
/// [latent_ch, h0, w0]; noises[m] for GAN scales is an image-shaped tensor or
/// empty for the zero-noise reconstruction path. VAE scales take no noise.
/// Returns the synthesized image at every scale, coarsest first, unclamped.
std::vector<ImageTensor> forward_cascade(const CascadeState& state,
                                         const std::vector<Tensor>& noises);

struct ScaleTrainStats {
    int scale = 0;
    bool gan_stage = false;
    std::vector<float> recon;       // per-iteration reconstruction loss
    std::vector<float> kl;          // VAE stages
    std::vector<float> gp;          // GAN stages: gradient penalty values
    std::vector<float> critic_gap;  // GAN stages: mean D(fake) - mean D(real)
    float noise_amplitude = 0.0f;   // sigma_m chosen at stage start
};

struct FirstStepReport {
    std::vector<ScaleTrainStats> scales;
};

using TrainProgressFn = std::function<void(int scale, int iter, float loss)>;

/// Trains all scales progressively, coarsest first, per the cascade's
/// objectives: scale 0 and the VAE scales minimize weighted reconstruction +
/// KL (updating E, G_0 and the current G_m); GAN scales minimize weighted
/// reconstruction + adversarial loss against a per-scale WGAN-GP critic.
/// Throws on divergence, naming the offending scale.
FirstStepReport train_first_step(CascadeState& state, const ImageTensor& train_image,
                                 uint64_t seed, const TrainProgressFn& progress = nullptr);

/// Draws a fresh sample at the base resolution; deterministic given the seed.
ImageTensor sample(const CascadeState& state, uint64_t seed);

/// Replays the stored reconstruction latent with zero GAN-stage noise.
ImageTensor reconstruct(const CascadeState& state);

}  // namespace ourgan
