#include "dimts/losses.hpp"

#include <algorithm>
#include <cmath>

#include "dimts/errors.hpp"

namespace dimts {

namespace {

constexpr double kVarianceFloor = 1e-24;

void check_same_shape(const ad::Tensor& a, const ad::Tensor& b, const char* what) {
    if (a.shape() != b.shape()) throw data_error(std::string(what) + ": shape mismatch");
}

void check_batches(const std::vector<ad::Tensor>& a, const std::vector<ad::Tensor>& b,
                   const char* what) {
    if (a.size() != b.size()) throw data_error(std::string(what) + ": batch size mismatch");
    if (a.empty()) throw data_error(std::string(what) + ": empty batch");
    for (std::size_t i = 0; i < a.size(); ++i) check_same_shape(a[i], b[i], what);
}

ad::Tensor stack_scalars(const std::vector<ad::Tensor>& xs) {
    std::vector<ad::Tensor> rows;
    rows.reserve(xs.size());
    for (const auto& x : xs) rows.push_back(ad::reshape(x, {1}));
    return ad::reshape(ad::stack_rows(rows), {xs.size()});
}

/// Mean of exp(-(a_i - b_j)^2 / (2 sigma^2)) over all (i, j).
ad::Tensor mean_kernel(const ad::Tensor& a, const ad::Tensor& b, double sigma) {
    std::size_t n = a.size(), m = b.size();
    ad::Tensor ones_n = ad::Tensor::constant(DenseArray({n}, 1.0));
    ad::Tensor ones_m = ad::Tensor::constant(DenseArray({m}, 1.0));
    ad::Tensor sq = ad::add(ad::outer(ad::square(a), ones_m),
                            ad::add(ad::outer(ones_n, ad::square(b)),
                                    ad::affine(ad::outer(a, b), -2.0, 0.0)));
    return ad::mean(ad::exp(ad::affine(sq, -1.0 / (2.0 * sigma * sigma), 0.0)));
}

ad::Tensor batch_mean(const std::vector<ad::Tensor>& terms) {
    ad::Tensor acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
    return ad::affine(acc, 1.0 / static_cast<double>(terms.size()), 0.0);
}

}  // namespace

void LossWeights::validate() const {
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || lambda1 < 0.0 || lambda2 < 0.0)
        throw data_error("loss weights must be finite and non-negative");
}

std::vector<std::pair<std::size_t, std::size_t>> channel_pairs(std::size_t channels) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < channels; ++i)
        for (std::size_t j = i + 1; j < channels; ++j) pairs.emplace_back(i, j);
    return pairs;
}

ad::Tensor ddpm_loss(const ad::Tensor& x0, const ad::Tensor& x_out) {
    check_same_shape(x0, x_out, "ddpm loss");
    return ad::mean(ad::square(ad::sub(x_out, x0)));
}

ad::Tensor fourier_loss(const ad::Tensor& x0, const ad::Tensor& x_out) {
    check_same_shape(x0, x_out, "fourier loss");
    if (x0.shape().size() != 2) throw data_error("fourier loss expects [length, channels]");
    std::size_t channels = x0.value().cols();
    ad::Tensor t0 = ad::transpose(x0);
    ad::Tensor t1 = ad::transpose(x_out);
    ad::Tensor acc;
    for (std::size_t c = 0; c < channels; ++c) {
        ad::Tensor diff = ad::sub(ad::dft(ad::row(t1, c)), ad::dft(ad::row(t0, c)));
        ad::Tensor term = ad::sum(ad::square(diff));
        acc = acc.defined() ? ad::add(acc, term) : term;
    }
    return ad::affine(acc, 1.0 / static_cast<double>(channels), 0.0);
}

CorrelationSamples pairwise_correlations(const std::vector<ad::Tensor>& batch) {
    if (batch.empty()) throw data_error("correlation samples: empty batch");
    CorrelationSamples out;
    out.channels = batch[0].value().cols();
    auto pairs = channel_pairs(out.channels);
    out.samples.resize(pairs.size());

    for (const auto& window : batch) {
        if (window.shape().size() != 2 || window.value().cols() != out.channels)
            throw data_error("correlation samples: windows must share [length, channels]");
        if (window.value().rows() < 2)
            throw data_error("correlation samples: window length must be >= 2");

        ad::Tensor wt = ad::transpose(window);
        std::vector<ad::Tensor> centered(out.channels);
        std::vector<ad::Tensor> variance(out.channels);
        for (std::size_t c = 0; c < out.channels; ++c) {
            ad::Tensor col = ad::row(wt, c);
            centered[c] = ad::sub(col, ad::mean(col));
            variance[c] = ad::mean(ad::square(centered[c]));
        }
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            auto [i, j] = pairs[p];
            if (variance[i].item() <= kVarianceFloor || variance[j].item() <= kVarianceFloor) {
                out.samples[p].push_back(ad::Tensor::scalar(0.0));
                out.degenerate = true;
                continue;
            }
            ad::Tensor cov = ad::mean(ad::mul(centered[i], centered[j]));
            out.samples[p].push_back(
                ad::div(cov, ad::sqrt(ad::mul(variance[i], variance[j]))));
        }
    }
    return out;
}

ad::Tensor mmd(const std::vector<ad::Tensor>& x, const std::vector<ad::Tensor>& y, double sigma) {
    if (x.empty() || y.empty()) throw data_error("mmd: empty sample set");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw data_error("mmd: bandwidth must be positive");
    ad::Tensor xs = stack_scalars(x);
    ad::Tensor ys = stack_scalars(y);
    ad::Tensor xy = ad::affine(mean_kernel(xs, ys, sigma), -2.0, 0.0);
    return ad::add(ad::add(mean_kernel(xs, xs, sigma), mean_kernel(ys, ys, sigma)), xy);
}

double median_bandwidth(const std::vector<double>& values) {
    if (values.size() < 2) return 1.0;
    std::vector<double> dist;
    dist.reserve(values.size() * (values.size() - 1) / 2);
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = i + 1; j < values.size(); ++j)
            dist.push_back(std::abs(values[i] - values[j]));
    std::sort(dist.begin(), dist.end());
    std::size_t n = dist.size();
    double med = (n % 2 == 1) ? dist[n / 2] : 0.5 * (dist[n / 2 - 1] + dist[n / 2]);
    return med > 1e-12 ? med : 1.0;
}

namespace {

ad::Tensor correlation_shift_from_samples(const CorrelationSamples& real,
                                          const CorrelationSamples& fake) {
    ad::Tensor acc;
    for (std::size_t p = 0; p < real.samples.size(); ++p) {
        std::vector<double> ref;
        ref.reserve(real.samples[p].size());
        for (const auto& s : real.samples[p]) ref.push_back(s.item());
        ad::Tensor term = mmd(real.samples[p], fake.samples[p], median_bandwidth(ref));
        acc = acc.defined() ? ad::add(acc, term) : term;
    }
    return ad::affine(acc, 1.0 / static_cast<double>(real.samples.size()), 0.0);
}

}  // namespace

ad::Tensor correlation_shift_loss(const std::vector<ad::Tensor>& x0_batch,
                                  const std::vector<ad::Tensor>& xout_batch) {
    check_batches(x0_batch, xout_batch, "correlation loss");
    if (x0_batch.size() < 2)
        throw data_error("correlation loss needs a batch of at least two windows");
    CorrelationSamples real = pairwise_correlations(x0_batch);
    if (real.channels < 2) return ad::Tensor::scalar(0.0);
    return correlation_shift_from_samples(real, pairwise_correlations(xout_batch));
}

LossBreakdown total_loss(const std::vector<ad::Tensor>& x0_batch,
                         const std::vector<ad::Tensor>& xout_batch, const LossWeights& weights) {
    weights.validate();
    check_batches(x0_batch, xout_batch, "total loss");

    std::vector<ad::Tensor> ddpm_terms, fourier_terms;
    ddpm_terms.reserve(x0_batch.size());
    fourier_terms.reserve(x0_batch.size());
    for (std::size_t i = 0; i < x0_batch.size(); ++i) {
        ddpm_terms.push_back(ddpm_loss(x0_batch[i], xout_batch[i]));
        fourier_terms.push_back(fourier_loss(x0_batch[i], xout_batch[i]));
    }

    LossBreakdown out;
    out.ddpm = batch_mean(ddpm_terms);
    out.fourier = batch_mean(fourier_terms);
    std::size_t channels = x0_batch[0].value().cols();
    if (weights.lambda2 != 0.0 && channels >= 2) {
        if (x0_batch.size() < 2)
            throw data_error("correlation loss needs a batch of at least two windows");
        CorrelationSamples real = pairwise_correlations(x0_batch);
        CorrelationSamples fake = pairwise_correlations(xout_batch);
        out.degenerate_correlation = real.degenerate || fake.degenerate;
        out.correlation = correlation_shift_from_samples(real, fake);
    } else {
        out.correlation = ad::Tensor::scalar(0.0);
    }
    out.total = ad::add(out.ddpm, ad::add(ad::affine(out.fourier, weights.lambda1, 0.0),
                                          ad::affine(out.correlation, weights.lambda2, 0.0)));
    return out;
}

}  // namespace dimts
