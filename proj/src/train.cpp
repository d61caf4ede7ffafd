#include "dimts/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "dimts/checkpoint.hpp"
#include "dimts/diffusion.hpp"
#include "dimts/errors.hpp"
#include "dimts/losses.hpp"
#include "dimts/model.hpp"
#include "dimts/permutation.hpp"
#include "dimts/rng.hpp"

namespace dimts {

namespace {

constexpr std::uint64_t kStreamStep = 101;    // shared diffusion step per batch
constexpr std::uint64_t kStreamBatch = 102;   // window indices
constexpr std::uint64_t kStreamNoise = 103;   // forward-process noise

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct BatchStats {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::size_t n = 0;

    void absorb(const DenseArray& a) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            lo = std::min(lo, a[i]);
            hi = std::max(hi, a[i]);
            sum += a[i];
        }
        n += a.size();
    }
    std::string str() const {
        return "min=" + fmt(lo) + " max=" + fmt(hi) + " mean=" + fmt(n ? sum / n : 0.0);
    }
};

Checkpoint make_checkpoint(const RunConfig& cfg, const DimTsModel& model, const Adam& adam,
                           const WindowedDataset& ds, const ChannelPermutation& perm,
                           std::size_t step, const Rng& rng_t, const Rng& rng_batch,
                           const Rng& rng_noise) {
    Checkpoint ck;
    ck.meta = {{"step", step},
               {"config", config_json(cfg)},
               {"permutation", perm.pi},
               {"permutation_fallback", perm.fallback},
               {"optimizer", {{"name", "adam"}, {"step", adam.step}}},
               {"rng", {{"t", rng_t.counter()},
                        {"batch", rng_batch.counter()},
                        {"noise", rng_noise.counter()}}},
               {"dataset", {{"channel_names", ds.channel_names},
                            {"ch_min", ds.ch_min},
                            {"ch_max", ds.ch_max}}}};
    const auto& params = model.params();
    for (const auto& [name, t] : params) ck.params.emplace_back(name, t.value());
    for (std::size_t i = 0; i < params.size(); ++i)
        ck.params.emplace_back("adam.m." + params[i].first, adam.m[i]);
    for (std::size_t i = 0; i < params.size(); ++i)
        ck.params.emplace_back("adam.v." + params[i].first, adam.v[i]);
    return ck;
}

}  // namespace

void Adam::init(const std::vector<std::pair<std::string, ad::Tensor>>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& [name, t] : params) {
        m.emplace_back(t.shape());
        v.emplace_back(t.shape());
    }
}

void Adam::update(std::vector<std::pair<std::string, ad::Tensor>>& params) {
    if (m.size() != params.size()) throw data_error("optimizer state does not match parameters");
    ++step;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        ad::Tensor& p = params[i].second;
        DenseArray& val = p.mutable_value();
        const DenseArray& g = p.grad();
        for (std::size_t j = 0; j < val.size(); ++j) {
            double gj = g.empty() ? 0.0 : g[j];
            m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * gj;
            v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * gj * gj;
            val[j] -= lr * (m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps);
        }
    }
}

TrainResult run_train(RunConfig cfg, const WindowedDataset& ds, const std::string& out_dir,
                      const std::string& resume_path) {
    cfg.model.seq_len = ds.length();
    cfg.model.channels = ds.channels();
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    // Channel scan order for the permutation blocks, learned from the data.
    ChannelPermutation perm = solve_ordering(pearson_similarity(ds.windows));

    Rng rng_t = Rng::stream(cfg.model.seed, kStreamStep);
    Rng rng_batch = Rng::stream(cfg.model.seed, kStreamBatch);
    Rng rng_noise = Rng::stream(cfg.model.seed, kStreamNoise);
    std::size_t start_step = 1;

    Checkpoint resume;
    bool resuming = !resume_path.empty();
    if (resuming) {
        resume = load_checkpoint(resume_path);
        RunConfig saved = config_from_json(resume.meta.at("config"));
        if (saved.model.seq_len != cfg.model.seq_len ||
            saved.model.channels != cfg.model.channels)
            throw data_error("checkpoint was trained on [" + std::to_string(saved.model.seq_len) +
                             " x " + std::to_string(saved.model.channels) +
                             "] windows, dataset provides [" + std::to_string(cfg.model.seq_len) +
                             " x " + std::to_string(cfg.model.channels) + "]");
        perm.pi = resume.meta.at("permutation").get<std::vector<std::size_t>>();
        perm.fallback = resume.meta.at("permutation_fallback").get<bool>();
        rng_t.set_counter(resume.meta.at("rng").at("t").get<std::uint64_t>());
        rng_batch.set_counter(resume.meta.at("rng").at("batch").get<std::uint64_t>());
        rng_noise.set_counter(resume.meta.at("rng").at("noise").get<std::uint64_t>());
        start_step = resume.meta.at("step").get<std::size_t>() + 1;
    }

    DimTsModel model(cfg.model, perm.pi);
    auto params = model.params();
    Adam adam;
    adam.lr = cfg.lr;
    adam.init(params);

    if (resuming) {
        adam.step = resume.meta.at("optimizer").at("step").get<std::size_t>();
        for (const auto& [name, value] : resume.params) {
            if (name.rfind("adam.m.", 0) == 0 || name.rfind("adam.v.", 0) == 0) {
                std::string base = name.substr(7);
                bool is_m = name[5] == 'm';
                bool found = false;
                for (std::size_t i = 0; i < params.size(); ++i)
                    if (params[i].first == base) {
                        if (!value.same_shape(is_m ? adam.m[i] : adam.v[i]))
                            throw data_error("optimizer moment shape mismatch for " + base);
                        (is_m ? adam.m[i] : adam.v[i]) = value;
                        found = true;
                        break;
                    }
                if (!found) throw data_error("checkpoint has moment for unknown parameter " + base);
            } else {
                model.load_param(name, value);
            }
        }
    }

    write_config(out_dir + "/config.txt", cfg);

    DiffusionSchedule sched = cosine_schedule(cfg.model.diffusion_steps);
    std::string log_path = out_dir + "/loss_log.csv";
    std::ofstream log(log_path);
    if (!log) throw data_error("cannot open for writing: " + log_path);
    log << "step,t,loss_ddpm,loss_fourier,loss_corr,loss_total\n";

    std::size_t M = ds.num_windows();
    TrainResult result;
    result.log_path = log_path;

    for (std::size_t s = start_step; s <= cfg.steps; ++s) {
        std::size_t t = 1 + rng_t.uniform_int(cfg.model.diffusion_steps);

        std::vector<ad::Tensor> x0s, xouts;
        x0s.reserve(cfg.batch_size);
        xouts.reserve(cfg.batch_size);
        BatchStats stats;
        double total = 0.0;
        // Inputs are finite by construction, so any mathematical failure in
        // here means the optimization itself diverged.
        try {
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                DenseArray x0 = ds.window(rng_batch.uniform_int(M));
                NoisedSample noised = forward_noise(x0, t, sched, rng_noise);
                stats.absorb(noised.x_t);
                x0s.push_back(ad::Tensor::constant(std::move(x0)));
                xouts.push_back(model.forward(ad::Tensor::constant(noised.x_t), t));
            }

            LossBreakdown lb = total_loss(x0s, xouts, cfg.weights);
            total = lb.total.item();
            if (!std::isfinite(total))
                throw numeric_error("non-finite loss: ddpm=" + fmt(lb.ddpm.item()) + " fourier=" +
                                    fmt(lb.fourier.item()) + " corr=" + fmt(lb.correlation.item()));

            model.zero_grads();
            ad::backward(lb.total);
            adam.update(params);

            log << s << ',' << t << ',' << fmt(lb.ddpm.item()) << ',' << fmt(lb.fourier.item())
                << ',' << fmt(lb.correlation.item()) << ',' << fmt(total) << '\n';
        } catch (const Error& e) {
            throw numeric_error("training aborted at step " + std::to_string(s) + " (t=" +
                                std::to_string(t) + "): " + e.what() + "; noised batch " +
                                stats.str());
        }

        result.steps_run += 1;
        result.final_total = total;

        if (cfg.checkpoint_every != 0 && s % cfg.checkpoint_every == 0 && s != cfg.steps) {
            Checkpoint ck =
                make_checkpoint(cfg, model, adam, ds, perm, s, rng_t, rng_batch, rng_noise);
            save_checkpoint(out_dir + "/checkpoint_" + std::to_string(s) + ".ckpt", ck);
        }
    }
    log.flush();
    if (!log) throw data_error("failed to write: " + log_path);

    Checkpoint final_ck =
        make_checkpoint(cfg, model, adam, ds, perm, cfg.steps, rng_t, rng_batch, rng_noise);
    result.checkpoint_path = out_dir + "/checkpoint.ckpt";
    save_checkpoint(result.checkpoint_path, final_ck);
    return result;
}

SampleResult run_sample(const std::string& checkpoint_path, std::size_t n, std::uint64_t seed,
                        double sigma_scale) {
    if (n == 0) throw data_error("sample count must be positive");
    Checkpoint ck = load_checkpoint(checkpoint_path);
    RunConfig cfg = config_from_json(ck.meta.at("config"));
    std::vector<std::size_t> pi;
    std::vector<std::string> names;
    std::vector<double> lo, hi;
    try {
        pi = ck.meta.at("permutation").get<std::vector<std::size_t>>();
        names = ck.meta.at("dataset").at("channel_names").get<std::vector<std::string>>();
        lo = ck.meta.at("dataset").at("ch_min").get<std::vector<double>>();
        hi = ck.meta.at("dataset").at("ch_max").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed checkpoint metadata: ") + e.what());
    }
    if (names.size() != cfg.model.channels)
        throw data_error("checkpoint metadata channel count does not match its config");

    DimTsModel model(cfg.model, pi);
    for (const auto& [name, value] : ck.params) {
        if (name.rfind("adam.", 0) == 0) continue;
        if (!value.all_finite())
            throw data_error("checkpoint parameter " + name + " contains non-finite values");
        model.load_param(name, value);
    }

    DiffusionSchedule sched = cosine_schedule(cfg.model.diffusion_steps);
    Denoiser den = [&model](const DenseArray& x, std::size_t t) {
        return model.forward_plain(x, t);
    };
    DenseArray scaled =
        sample(den, sched, n, cfg.model.seq_len, cfg.model.channels, seed, sigma_scale);

    WindowedDataset scaler;
    scaler.channel_names = names;
    scaler.ch_min = lo;
    scaler.ch_max = hi;
    return {scaler.denormalize(scaled), names};
}

}  // namespace dimts
