#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dimts/autodiff.hpp"

namespace dimts {

struct LossWeights {
    double lambda1 = 0.01;  // Fourier term
    double lambda2 = 0.01;  // correlation-shift term
    void validate() const;
};

/// Per-window Pearson correlations for every unordered channel pair.
/// samples[p][w] is a scalar tensor: pair p evaluated on window w. Windows
/// with a zero-variance channel contribute a constant 0 (gradient cut) and
/// raise `degenerate`.
struct CorrelationSamples {
    std::size_t channels = 0;
    std::vector<std::vector<ad::Tensor>> samples;
    bool degenerate = false;
};

struct LossBreakdown {
    ad::Tensor total;
    ad::Tensor ddpm;
    ad::Tensor fourier;
    ad::Tensor correlation;
    bool degenerate_correlation = false;
};

/// Unordered channel pairs (i, j), i < j, in lexicographic order.
std::vector<std::pair<std::size_t, std::size_t>> channel_pairs(std::size_t channels);

/// Mean squared error over all elements.
ad::Tensor ddpm_loss(const ad::Tensor& x0, const ad::Tensor& x_out);

/// Squared complex-difference norm of the per-channel temporal DFTs,
/// averaged over channels. Inputs are [L, C].
ad::Tensor fourier_loss(const ad::Tensor& x0, const ad::Tensor& x_out);

/// Per-window pairwise Pearson correlations of a batch of [L, C] windows.
CorrelationSamples pairwise_correlations(const std::vector<ad::Tensor>& batch);

/// Biased squared-MMD estimate with Gaussian RBF kernel
/// k(a, b) = exp(-(a-b)^2 / (2 sigma^2)) between two sets of scalar samples.
ad::Tensor mmd(const std::vector<ad::Tensor>& x, const std::vector<ad::Tensor>& y, double sigma);

/// Median pairwise absolute distance of scalar samples; falls back to 1.0
/// when fewer than two samples or the median collapses to ~0.
double median_bandwidth(const std::vector<double>& values);

/// Mean over channel pairs of the MMD between real and generated per-window
/// correlation distributions. Bandwidth per pair comes from the real samples.
ad::Tensor correlation_shift_loss(const std::vector<ad::Tensor>& x0_batch,
                                  const std::vector<ad::Tensor>& xout_batch);

/// Weighted composite objective over a batch of matched [L, C] windows; both
/// batches share one diffusion step by construction of the training loop.
LossBreakdown total_loss(const std::vector<ad::Tensor>& x0_batch,
                         const std::vector<ad::Tensor>& xout_batch, const LossWeights& weights);

}  // namespace dimts
