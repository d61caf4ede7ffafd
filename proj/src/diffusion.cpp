#include "dimts/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dimts/errors.hpp"

namespace dimts {

DiffusionSchedule cosine_schedule(std::size_t T) {
    if (T < 1) throw data_error("schedule needs T >= 1");
    const double s = 0.008;
    auto f = [s, T](double t) {
        double arg = (t / static_cast<double>(T) + s) / (1.0 + s) * std::numbers::pi / 2.0;
        double c = std::cos(arg);
        return c * c;
    };
    double f0 = f(0.0);

    DiffusionSchedule sched;
    sched.T = T;
    sched.beta.assign(T + 1, 0.0);
    sched.alpha.assign(T + 1, 1.0);
    sched.alpha_bar.assign(T + 1, 1.0);

    double prev_raw = 1.0;
    for (std::size_t t = 1; t <= T; ++t) {
        double raw = f(static_cast<double>(t)) / f0;
        double beta = std::min(1.0 - raw / prev_raw, 0.999);
        prev_raw = raw;
        sched.beta[t] = beta;
        sched.alpha[t] = 1.0 - beta;
        sched.alpha_bar[t] = sched.alpha_bar[t - 1] * sched.alpha[t];
    }
    return sched;
}

NoisedSample forward_noise(const DenseArray& x0, std::size_t t, const DiffusionSchedule& sched,
                           Rng& rng) {
    if (t < 1 || t > sched.T) throw data_error("diffusion step out of range");
    double ab = sched.alpha_bar[t];
    double signal = std::sqrt(ab), noise = std::sqrt(1.0 - ab);
    NoisedSample out;
    out.t = t;
    out.eps = rng.normal_array(x0.shape());
    out.x_t = DenseArray(x0.shape());
    for (std::size_t i = 0; i < x0.size(); ++i) out.x_t[i] = signal * x0[i] + noise * out.eps[i];
    return out;
}

DenseArray posterior_mean(const DenseArray& x0, const DenseArray& x_t, std::size_t t,
                          const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.T) throw data_error("diffusion step out of range");
    if (!x0.same_shape(x_t)) throw data_error("posterior mean inputs must share a shape");
    double ab_t = sched.alpha_bar[t];
    double ab_prev = sched.alpha_bar[t - 1];
    double beta = sched.beta[t];
    double alpha = sched.alpha[t];
    double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
    double ct = std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab_t);
    DenseArray mu(x0.shape());
    for (std::size_t i = 0; i < x0.size(); ++i) mu[i] = c0 * x0[i] + ct * x_t[i];
    return mu;
}

double posterior_variance(std::size_t t, const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.T) throw data_error("diffusion step out of range");
    return (1.0 - sched.alpha_bar[t - 1]) / (1.0 - sched.alpha_bar[t]) * sched.beta[t];
}

DenseArray reverse_step(const DenseArray& x_t, std::size_t t, const Denoiser& model,
                        const DiffusionSchedule& sched, Rng& rng, double sigma_scale) {
    if (t < 1 || t > sched.T) throw data_error("diffusion step out of range");
    DenseArray x0_hat = model(x_t, t);
    if (!x0_hat.same_shape(x_t)) throw data_error("denoiser output shape mismatch");
    DenseArray mu = posterior_mean(x0_hat, x_t, t, sched);
    if (t == 1 || sigma_scale == 0.0) return mu;
    double sigma = sigma_scale * std::sqrt(sched.beta[t]);
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += sigma * rng.normal();
    return mu;
}

DenseArray sample(const Denoiser& model, const DiffusionSchedule& sched, std::size_t n,
                  std::size_t L, std::size_t C, std::uint64_t seed, double sigma_scale) {
    DenseArray out({n, L, C});
    for (std::size_t chain = 0; chain < n; ++chain) {
        Rng rng = Rng::stream(seed, chain);
        DenseArray x = rng.normal_array({L, C});
        // The chain starts from finite noise and every schedule coefficient is
        // finite, so a failure (or non-finite state) mid-chain can only mean
        // the reverse recursion diverged numerically.
        std::size_t t = sched.T;
        try {
            for (; t >= 1; --t)
                x = reverse_step(x, t, model, sched, rng, sigma_scale);
        } catch (const Error& e) {
            throw numeric_error("reverse chain " + std::to_string(chain) + " diverged at t=" +
                                std::to_string(t) + ": " + e.what());
        }
        if (!x.all_finite())
            throw numeric_error("reverse chain " + std::to_string(chain) +
                                " produced non-finite values");
        for (std::size_t i = 0; i < x.size(); ++i)
            out[chain * L * C + i] = std::clamp(x[i], -1.0, 1.0);
    }
    return out;
}

}  // namespace dimts
