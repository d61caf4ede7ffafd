#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dimts/array.hpp"
#include "dimts/autodiff.hpp"

namespace dimts {

/// Input-independent scan parameters: selection already evaluated, one
/// discretized (a_bar, b_bar, c) triple per scan position.
struct FrozenSsm {
    std::size_t K = 0;
    std::size_t N = 0;
    std::vector<DenseArray> a_bar;  // K x [N], entries in (0,1)
    std::vector<DenseArray> b_bar;  // K x [N]
    std::vector<DenseArray> c;      // K x [N]

    void validate() const;
};

/// Lag set for state fusion. `lags` are flat offsets (first entry always 0);
/// when induced from dilated convolution geometry the generating factors are
/// kept alongside.
struct LagSpec {
    std::vector<std::size_t> lags;
    std::vector<double> weights;
    std::vector<std::size_t> dilation_factors;

    void validate() const;
};

LagSpec single_lag();
LagSpec lags_from_dilations(std::size_t period, const std::vector<std::size_t>& factors,
                            double weight0, double weight_lag);

/// Divisor of K nearest floor(sqrt(K)); ties resolve to the larger divisor.
std::size_t default_fusion_period(std::size_t K);

/// ZOH discretization for diagonal A: a_bar = exp(dt*A),
/// b_bar = ((exp(dt*A) - 1) / A) * B. A must be strictly negative.
std::pair<DenseArray, DenseArray> discretize(const DenseArray& A, const DenseArray& B, double dt);

// Frozen scans: x is [K x H] (H independent channels sharing the parameters).
DenseArray selective_scan(const FrozenSsm& p, const DenseArray& x);
DenseArray lag_fusion_scan(const FrozenSsm& p, const LagSpec& lags, const DenseArray& x);
DenseArray permutation_scan(const FrozenSsm& p, const DenseArray& H, const DenseArray& x);

/// Latent-state trajectory [K x N] of a single-channel scan, for fusing
/// states outside the scan itself.
DenseArray selective_scan_states(const FrozenSsm& p, const DenseArray& x_col);

/// Weighted fusion of lagged state rows; offsets are {0} plus
/// {period * factor} for each dilation factor, out-of-range rows are zero.
DenseArray dilated_fusion(const DenseArray& states, const LagSpec& lags, std::size_t period);

// Structured-matrix materializations (per-channel [K x K] action).
DenseArray materialize_M(const FrozenSsm& p);
DenseArray materialize_MF(const FrozenSsm& p, const LagSpec& lags);
DenseArray materialize_MC(const FrozenSsm& p, const DenseArray& H);

// Permutation-matrix helpers (H_{ij} = 1 iff i = pi[j]).
bool is_permutation_matrix(const DenseArray& H);
std::vector<std::size_t> perm_from_matrix(const DenseArray& H);
DenseArray matrix_from_perm(const std::vector<std::size_t>& pi);
std::vector<std::size_t> invert_perm(const std::vector<std::size_t>& pi);

/// Learnable selective-scan parameters: affine selection maps from the token
/// to (B, C, dt) plus the log-parameterized diagonal transition and lag
/// fusion weights.
struct SsmParams {
    ad::Tensor a_log;        // [N], A = -exp(a_log)
    ad::Tensor w_b, b_b;     // [d x N], [N]
    ad::Tensor w_c, b_c;     // [d x N], [N]
    ad::Tensor w_dt, b_dt;   // [d x 1], [1]
    ad::Tensor eta;          // [|lags|] fusion weights (unused by vanilla scan)
};

// Differentiable scans over token rows x [K x d].
ad::Tensor selective_scan(const SsmParams& p, const ad::Tensor& x);
ad::Tensor lag_fusion_scan(const SsmParams& p, const std::vector<std::size_t>& lags,
                           const ad::Tensor& x);
ad::Tensor permutation_scan(const SsmParams& p, const std::vector<std::size_t>& pi,
                            const ad::Tensor& x);

/// Evaluate the selection maps on a fixed input, yielding frozen per-position
/// parameters that reproduce the differentiable scan exactly.
FrozenSsm freeze(const SsmParams& p, const DenseArray& x);

}  // namespace dimts
