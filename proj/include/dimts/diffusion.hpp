#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dimts/array.hpp"
#include "dimts/rng.hpp"

namespace dimts {

/// Precomputed noise schedule tables, 1-indexed by diffusion step
/// (index 0 holds the t=0 boundary: beta=0, alpha=1, alpha_bar=1).
struct DiffusionSchedule {
    std::size_t T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
};

/// Squared-cosine cumulative schedule with offset s = 0.008 and beta
/// clipped to 0.999; alpha_bar is rebuilt as the running product of alpha so
/// the tables are self-consistent to machine precision.
DiffusionSchedule cosine_schedule(std::size_t T);

struct NoisedSample {
    DenseArray x_t;
    std::size_t t = 0;
    DenseArray eps;
};

NoisedSample forward_noise(const DenseArray& x0, std::size_t t, const DiffusionSchedule& sched,
                           Rng& rng);

DenseArray posterior_mean(const DenseArray& x0, const DenseArray& x_t, std::size_t t,
                          const DiffusionSchedule& sched);
double posterior_variance(std::size_t t, const DiffusionSchedule& sched);

/// x0-predicting denoiser: maps (x_t, t) to an estimate of the clean sample.
using Denoiser = std::function<DenseArray(const DenseArray&, std::size_t)>;

/// One reverse transition x_t -> x_{t-1}. sigma_scale lets tests force the
/// deterministic chain (0 disables noise everywhere; it is always disabled at
/// t = 1).
DenseArray reverse_step(const DenseArray& x_t, std::size_t t, const Denoiser& model,
                        const DiffusionSchedule& sched, Rng& rng, double sigma_scale = 1.0);

/// Full reverse chain from Gaussian noise; returns [n x L x C]. Each chain
/// draws from its own RNG stream (seed, chain index) and the result is
/// clipped to [-1, 1] only at the end.
DenseArray sample(const Denoiser& model, const DiffusionSchedule& sched, std::size_t n,
                  std::size_t L, std::size_t C, std::uint64_t seed, double sigma_scale = 1.0);

}  // namespace dimts
