#include "dimts/model.hpp"

#include <cmath>

#include "dimts/errors.hpp"

namespace dimts {

void ModelConfig::validate() const {
    if (seq_len < 2) throw data_error("seq_len must be >= 2");
    if (channels < 1) throw data_error("channels must be >= 1");
    if (hidden_dim < 2 || hidden_dim % 2 != 0)
        throw data_error("hidden_dim must be even and >= 2");
    if (state_dim < 1) throw data_error("state_dim must be >= 1");
    if (num_encoders < 1) throw data_error("num_encoders must be >= 1");
    if (num_difm < 1 || num_dipm < 1) throw data_error("block counts must be >= 1");
    if (diffusion_steps < 1) throw data_error("diffusion_steps must be >= 1");
    for (std::size_t i = 0; i < dilation_factors.size(); ++i) {
        if (dilation_factors[i] == 0) throw data_error("dilation factors must be positive");
        if (i > 0 && dilation_factors[i] <= dilation_factors[i - 1])
            throw data_error("dilation factors must be strictly increasing");
    }
    if (lag_weight0 <= 0.0) throw data_error("lag weight init must be positive");
}

LagSpec ModelConfig::lag_spec() const {
    if (dilation_factors.empty()) return single_lag();
    return lags_from_dilations(default_fusion_period(seq_len), dilation_factors, lag_weight0,
                               lag_weight);
}

DenseArray positional_encoding(std::size_t length, std::size_t dim) {
    if (dim % 2 != 0) throw data_error("positional encoding needs an even dimension");
    DenseArray pe({length, dim});
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < dim / 2; ++i) {
            double angle = static_cast<double>(pos) /
                           std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(dim));
            pe.at(pos, 2 * i) = std::sin(angle);
            pe.at(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

DenseArray timestep_features(std::size_t t, std::size_t dim) {
    if (dim % 2 != 0) throw data_error("timestep features need an even dimension");
    DenseArray f({dim});
    for (std::size_t i = 0; i < dim / 2; ++i) {
        double angle = static_cast<double>(t) /
                       std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(dim));
        f[2 * i] = std::sin(angle);
        f[2 * i + 1] = std::cos(angle);
    }
    return f;
}

ad::Tensor linear(const LinearLayer& l, const ad::Tensor& x) {
    return ad::add(ad::matmul(x, l.w), l.b);
}

ad::Tensor linear_vec(const LinearLayer& l, const ad::Tensor& x) {
    std::size_t in = x.size(), out = l.b.size();
    return ad::reshape(linear(l, ad::reshape(x, {1, in})), {out});
}

ad::Tensor bimamba_encode(const SsmParams& fwd, const SsmParams& bwd, const ad::Tensor& z) {
    ad::Tensor forward_out = selective_scan(fwd, z);
    ad::Tensor backward_out = ad::reverse_rows(selective_scan(bwd, ad::reverse_rows(z)));
    return ad::add(forward_out, backward_out);
}

ad::Tensor adaln_forward(const AdaLnBlock& blk, const CoreFn& core, const ad::Tensor& y,
                         const ad::Tensor& t_emb) {
    std::size_t d = t_emb.size();
    ad::Tensor chunks = linear_vec(blk.chunk, ad::silu(t_emb));  // [6d]
    ad::Tensor a1 = ad::slice(chunks, 0, d);
    ad::Tensor b1 = ad::slice(chunks, d, d);
    ad::Tensor g1 = ad::slice(chunks, 2 * d, d);
    ad::Tensor a2 = ad::slice(chunks, 3 * d, d);
    ad::Tensor b2 = ad::slice(chunks, 4 * d, d);
    ad::Tensor g2 = ad::slice(chunks, 5 * d, d);

    ad::Tensor u = ad::add(y, ad::mul(core(ad::add(ad::mul(ad::layer_norm_rows(y), g1), b1)), a1));
    ad::Tensor h = ad::add(ad::mul(ad::layer_norm_rows(u), g2), b2);
    ad::Tensor mlp_out = linear(blk.mlp2, ad::gelu(linear(blk.mlp1, h)));
    return ad::add(u, ad::mul(mlp_out, a2));
}

ad::Tensor decoder_stack(const ad::Tensor& z, const std::vector<CoreFn>& blocks) {
    if (blocks.empty()) throw data_error("decoder stack needs at least one block");
    std::vector<ad::Tensor> y;
    y.reserve(blocks.size());
    y.push_back(blocks[0](z));
    if (blocks.size() > 1) y.push_back(blocks[1](ad::add(y[0], z)));
    for (std::size_t i = 2; i < blocks.size(); ++i)
        y.push_back(blocks[i](ad::add(y[i - 1], y[i - 2])));
    ad::Tensor total = y[0];
    for (std::size_t i = 1; i < y.size(); ++i) total = ad::add(total, y[i]);
    return total;
}

ad::Tensor DimTsModel::register_param(const std::string& name, DenseArray value) {
    ad::Tensor t = ad::Tensor::leaf(std::move(value));
    params_.emplace_back(name, t);
    return t;
}

LinearLayer DimTsModel::make_linear(const std::string& name, std::size_t in, std::size_t out,
                                    bool zero_weights) {
    LinearLayer l;
    if (zero_weights) {
        l.w = register_param(name + ".w", DenseArray({in, out}));
    } else {
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        l.w = register_param(name + ".w", init_rng_.uniform_array({in, out}, -bound, bound));
    }
    l.b = register_param(name + ".b", DenseArray({out}));
    return l;
}

SsmParams DimTsModel::make_ssm(const std::string& name, bool with_eta) {
    std::size_t d = cfg_.hidden_dim, N = cfg_.state_dim;
    double bound = 1.0 / std::sqrt(static_cast<double>(d));
    SsmParams p;
    DenseArray a_log({N});
    for (std::size_t n = 0; n < N; ++n) a_log[n] = std::log(static_cast<double>(n + 1));
    p.a_log = register_param(name + ".a_log", a_log);
    p.w_b = register_param(name + ".w_b", init_rng_.uniform_array({d, N}, -bound, bound));
    p.b_b = register_param(name + ".b_b", DenseArray({N}));
    p.w_c = register_param(name + ".w_c", init_rng_.uniform_array({d, N}, -bound, bound));
    p.b_c = register_param(name + ".b_c", DenseArray({N}));
    p.w_dt = register_param(name + ".w_dt", init_rng_.uniform_array({d, 1}, -bound, bound));
    p.b_dt = register_param(name + ".b_dt", DenseArray({1}));
    if (with_eta) {
        DenseArray eta({lags_.lags.size()});
        eta[0] = cfg_.lag_weight0;
        for (std::size_t i = 1; i < eta.size(); ++i) eta[i] = cfg_.lag_weight;
        p.eta = register_param(name + ".eta", eta);
    }
    return p;
}

AdaLnBlock DimTsModel::make_ada(const std::string& name) {
    std::size_t d = cfg_.hidden_dim;
    AdaLnBlock blk;
    blk.chunk = make_linear(name + ".chunk", d, 6 * d, /*zero_weights=*/true);
    // Identity at init: gamma chunks start at 1, everything else at 0.
    DenseArray& cb = blk.chunk.b.mutable_value();
    for (std::size_t i = 0; i < d; ++i) {
        cb[2 * d + i] = 1.0;
        cb[5 * d + i] = 1.0;
    }
    blk.mlp1 = make_linear(name + ".mlp1", d, 4 * d);
    blk.mlp2 = make_linear(name + ".mlp2", 4 * d, d);
    return blk;
}

DimTsModel::DimTsModel(ModelConfig cfg, std::vector<std::size_t> permutation)
    : cfg_(std::move(cfg)), perm_(std::move(permutation)), init_rng_(0) {
    cfg_.validate();
    lags_ = cfg_.lag_spec();
    init_rng_ = Rng::stream(cfg_.seed, 0x6d6f64656cull);  // init stream

    if (perm_.empty()) {
        perm_.resize(cfg_.channels);
        for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
    }
    if (perm_.size() != cfg_.channels) throw data_error("permutation size mismatch");
    std::vector<bool> seen(perm_.size(), false);
    for (std::size_t v : perm_) {
        if (v >= perm_.size() || seen[v]) throw data_error("invalid channel permutation");
        seen[v] = true;
    }

    std::size_t d = cfg_.hidden_dim;
    temb1_ = make_linear("temb.l1", 128, d);
    temb2_ = make_linear("temb.l2", d, d);
    embed_t_ = make_linear("embed_t", cfg_.channels, d);
    embed_c_ = make_linear("embed_c", cfg_.seq_len, d);
    for (std::size_t i = 0; i < cfg_.num_encoders; ++i) {
        std::string base = "enc_t." + std::to_string(i);
        enc_t_.push_back({make_ssm(base + ".fwd", false), make_ssm(base + ".bwd", false)});
    }
    for (std::size_t i = 0; i < cfg_.num_encoders; ++i) {
        std::string base = "enc_c." + std::to_string(i);
        enc_c_.push_back({make_ssm(base + ".fwd", false), make_ssm(base + ".bwd", false)});
    }
    for (std::size_t i = 0; i < cfg_.num_difm; ++i) {
        std::string base = "difm." + std::to_string(i);
        difm_.push_back({make_ssm(base + ".ssm", true), make_ada(base)});
    }
    for (std::size_t i = 0; i < cfg_.num_dipm; ++i) {
        std::string base = "dipm." + std::to_string(i);
        dipm_.push_back({make_ssm(base + ".ssm", false), make_ada(base)});
    }
    out_t_ = make_linear("out_t", d, cfg_.channels);
    out_c_ = make_linear("out_c", d, cfg_.seq_len);
    pe_ = ad::Tensor::constant(positional_encoding(cfg_.seq_len, d));
}

ad::Tensor DimTsModel::timestep_embedding(std::size_t t) {
    ad::Tensor raw = ad::Tensor::constant(timestep_features(t));
    return linear_vec(temb2_, ad::silu(linear_vec(temb1_, raw)));
}

ad::Tensor DimTsModel::forward(const ad::Tensor& x_t, std::size_t t) {
    if (x_t.shape() != Shape{cfg_.seq_len, cfg_.channels})
        throw data_error("model input must be [seq_len, channels]");
    if (t < 1 || t > cfg_.diffusion_steps) throw data_error("diffusion step out of range");

    ad::Tensor temb = timestep_embedding(t);

    ad::Tensor zt = ad::add(linear(embed_t_, x_t), pe_);
    for (const auto& e : enc_t_) zt = bimamba_encode(e.fwd, e.bwd, zt);
    std::vector<CoreFn> temporal;
    for (const auto& blk : difm_) {
        temporal.push_back([this, &blk, &temb](const ad::Tensor& y) {
            CoreFn core = [this, &blk](const ad::Tensor& h) {
                return lag_fusion_scan(blk.ssm, lags_.lags, h);
            };
            return adaln_forward(blk.ada, core, y, temb);
        });
    }
    ad::Tensor yt = decoder_stack(zt, temporal);

    ad::Tensor zc = linear(embed_c_, ad::transpose(x_t));
    for (const auto& e : enc_c_) zc = bimamba_encode(e.fwd, e.bwd, zc);
    std::vector<CoreFn> channel;
    for (const auto& blk : dipm_) {
        channel.push_back([this, &blk, &temb](const ad::Tensor& y) {
            CoreFn core = [this, &blk](const ad::Tensor& h) {
                return permutation_scan(blk.ssm, perm_, h);
            };
            return adaln_forward(blk.ada, core, y, temb);
        });
    }
    ad::Tensor yc = decoder_stack(zc, channel);

    return ad::add(linear(out_t_, yt), ad::transpose(linear(out_c_, yc)));
}

DenseArray DimTsModel::forward_plain(const DenseArray& x_t, std::size_t t) {
    ad::NoGradScope ng;
    return forward(ad::Tensor::constant(x_t), t).value();
}

ad::Tensor DimTsModel::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw data_error("unknown parameter '" + name + "'");
}

void DimTsModel::load_param(const std::string& name, const DenseArray& value) {
    ad::Tensor t = param(name);
    if (t.shape() != value.shape())
        throw data_error("parameter '" + name + "' shape mismatch");
    t.mutable_value() = value;
}

void DimTsModel::zero_grads() {
    for (auto& [n, t] : params_) t.zero_grad();
}

}  // namespace dimts
