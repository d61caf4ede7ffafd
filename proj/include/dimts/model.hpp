#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dimts/autodiff.hpp"
#include "dimts/rng.hpp"
#include "dimts/ssm.hpp"

namespace dimts {

struct ModelConfig {
    std::size_t seq_len = 24;
    std::size_t channels = 1;
    std::size_t hidden_dim = 128;
    std::size_t state_dim = 16;
    std::size_t num_encoders = 1;
    std::size_t num_difm = 3;
    std::size_t num_dipm = 3;
    std::vector<std::size_t> dilation_factors = {1, 2, 3};  // empty -> no lag fusion
    double lag_weight0 = 1.0;
    double lag_weight = 0.1;
    std::size_t diffusion_steps = 500;
    std::uint64_t seed = 0;

    void validate() const;
    LagSpec lag_spec() const;  // induced from seq_len and dilation_factors
};

/// Sinusoidal table: PE[pos][2i] = sin(pos / 10000^{2i/d}),
/// PE[pos][2i+1] = cos(pos / 10000^{2i/d}). d must be even.
DenseArray positional_encoding(std::size_t length, std::size_t dim);

/// One row of the same table at pos = t, used as raw timestep features.
DenseArray timestep_features(std::size_t t, std::size_t dim = 128);

struct LinearLayer {
    ad::Tensor w;  // [in, out]
    ad::Tensor b;  // [out]
};

ad::Tensor linear(const LinearLayer& l, const ad::Tensor& x);       // [K,in] -> [K,out]
ad::Tensor linear_vec(const LinearLayer& l, const ad::Tensor& x);   // [in] -> [out]

/// Forward scan plus a reversed scan of the reversed sequence, summed.
ad::Tensor bimamba_encode(const SsmParams& fwd, const SsmParams& bwd, const ad::Tensor& z);

/// Conditioning + residual wrapper shared by DiFM and DiPM. The core is the
/// block's scan variant; chunks come from the block's producer applied to the
/// timestep embedding.
struct AdaLnBlock {
    LinearLayer chunk;  // d -> 6d, zero weights at init
    LinearLayer mlp1;   // d -> 4d
    LinearLayer mlp2;   // 4d -> d
};

using CoreFn = std::function<ad::Tensor(const ad::Tensor&)>;

ad::Tensor adaln_forward(const AdaLnBlock& blk, const CoreFn& core, const ad::Tensor& y,
                         const ad::Tensor& t_emb);

/// Y0 = blk0(Z); Y1 = blk1(Y0 + Z); Yi = blki(Yi-1 + Yi-2); returns sum(Yi).
ad::Tensor decoder_stack(const ad::Tensor& z, const std::vector<CoreFn>& blocks);

class DimTsModel {
public:
    explicit DimTsModel(ModelConfig cfg, std::vector<std::size_t> permutation = {});

    ad::Tensor forward(const ad::Tensor& x_t, std::size_t t);
    DenseArray forward_plain(const DenseArray& x_t, std::size_t t);

    const ModelConfig& config() const { return cfg_; }
    const std::vector<std::size_t>& permutation() const { return perm_; }
    const LagSpec& lags() const { return lags_; }

    /// Named parameters in fixed registration order.
    std::vector<std::pair<std::string, ad::Tensor>>& params() { return params_; }
    const std::vector<std::pair<std::string, ad::Tensor>>& params() const { return params_; }
    ad::Tensor param(const std::string& name) const;
    void load_param(const std::string& name, const DenseArray& value);
    void zero_grads();

private:
    struct Encoder {
        SsmParams fwd, bwd;
    };
    struct Block {
        SsmParams ssm;
        AdaLnBlock ada;
    };

    LinearLayer make_linear(const std::string& name, std::size_t in, std::size_t out,
                            bool zero_weights = false);
    SsmParams make_ssm(const std::string& name, bool with_eta);
    AdaLnBlock make_ada(const std::string& name);
    ad::Tensor register_param(const std::string& name, DenseArray value);
    ad::Tensor timestep_embedding(std::size_t t);

    ModelConfig cfg_;
    std::vector<std::size_t> perm_;
    LagSpec lags_;
    Rng init_rng_;
    std::vector<std::pair<std::string, ad::Tensor>> params_;

    LinearLayer temb1_, temb2_;
    LinearLayer embed_t_, embed_c_;
    std::vector<Encoder> enc_t_, enc_c_;
    std::vector<Block> difm_, dipm_;
    LinearLayer out_t_, out_c_;
    ad::Tensor pe_;  // constant [L, d]
};

}  // namespace dimts
