#include "dimts/ssm.hpp"

#include <algorithm>
#include <cmath>

#include "dimts/errors.hpp"

namespace dimts {

void FrozenSsm::validate() const {
    if (K == 0 || N == 0) throw data_error("frozen scan needs K >= 1 and N >= 1");
    if (a_bar.size() != K || b_bar.size() != K || c.size() != K)
        throw data_error("frozen scan parameter tables must have K entries");
    for (std::size_t k = 0; k < K; ++k) {
        if (a_bar[k].size() != N || b_bar[k].size() != N || c[k].size() != N)
            throw data_error("frozen scan parameter entry has wrong state size");
    }
}

void LagSpec::validate() const {
    if (lags.empty()) throw data_error("lag set must be non-empty");
    if (lags[0] != 0) throw data_error("lag set must contain offset 0 first");
    for (std::size_t i = 1; i < lags.size(); ++i) {
        if (lags[i] <= lags[i - 1]) throw data_error("lag offsets must be strictly increasing");
    }
    if (weights.size() != lags.size())
        throw data_error("lag weights must align with lag offsets");
}

LagSpec single_lag() {
    LagSpec s;
    s.lags = {0};
    s.weights = {1.0};
    return s;
}

LagSpec lags_from_dilations(std::size_t period, const std::vector<std::size_t>& factors,
                            double weight0, double weight_lag) {
    if (period < 1) throw data_error("fusion period must be >= 1");
    LagSpec s;
    s.lags = {0};
    s.weights = {weight0};
    s.dilation_factors = factors;
    for (std::size_t f : factors) {
        if (f < 1) throw data_error("dilation factors must be >= 1");
        s.lags.push_back(period * f);
        s.weights.push_back(weight_lag);
    }
    s.validate();
    return s;
}

std::size_t default_fusion_period(std::size_t K) {
    if (K < 1) throw data_error("sequence length must be >= 1");
    auto target = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(K))));
    std::size_t best = 1;
    auto dist = [target](std::size_t d) {
        return d > target ? d - target : target - d;
    };
    for (std::size_t d = 1; d <= K; ++d) {
        if (K % d != 0) continue;
        if (dist(d) < dist(best) || (dist(d) == dist(best) && d > best)) best = d;
    }
    return best;
}

std::pair<DenseArray, DenseArray> discretize(const DenseArray& A, const DenseArray& B, double dt) {
    if (A.ndim() != 1 || !A.same_shape(B)) throw data_error("discretize expects matching 1-D A and B");
    if (!(dt > 0.0)) throw numeric_error("discretization step must be positive");
    std::size_t n = A.size();
    DenseArray a_bar({n}), b_bar({n});
    for (std::size_t i = 0; i < n; ++i) {
        if (A[i] >= 0.0)
            throw numeric_error("unstable transition: A entry " + std::to_string(i) +
                                " is not negative");
        double e = std::exp(dt * A[i]);
        a_bar[i] = e;
        b_bar[i] = (e - 1.0) / A[i] * B[i];
    }
    return {std::move(a_bar), std::move(b_bar)};
}

namespace {

void check_scan_input(const FrozenSsm& p, const DenseArray& x) {
    p.validate();
    if (x.ndim() != 2 || x.rows() != p.K)
        throw data_error("scan input must be [K x H] with K = " + std::to_string(p.K));
    if (!x.all_finite()) throw data_error("scan input contains non-finite values");
}

}  // namespace

DenseArray selective_scan(const FrozenSsm& p, const DenseArray& x) {
    check_scan_input(p, x);
    std::size_t K = p.K, N = p.N, H = x.cols();
    DenseArray y({K, H});
    std::vector<double> h(N);
    for (std::size_t ch = 0; ch < H; ++ch) {
        for (std::size_t k = 0; k < K; ++k) {
            double xv = x[k * H + ch];
            const DenseArray& ab = p.a_bar[k];
            const DenseArray& bb = p.b_bar[k];
            const DenseArray& ck = p.c[k];
            if (k == 0) {
                for (std::size_t n = 0; n < N; ++n) h[n] = xv * bb[n];
            } else {
                for (std::size_t n = 0; n < N; ++n) h[n] = h[n] * ab[n] + xv * bb[n];
            }
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) acc += h[n] * ck[n];
            y[k * H + ch] = acc;
        }
    }
    return y;
}

DenseArray selective_scan_states(const FrozenSsm& p, const DenseArray& x_col) {
    p.validate();
    if (x_col.ndim() != 1 || x_col.size() != p.K)
        throw data_error("state trajectory expects a length-K input column");
    std::size_t K = p.K, N = p.N;
    DenseArray hist({K, N});
    for (std::size_t k = 0; k < K; ++k) {
        double xv = x_col[k];
        for (std::size_t n = 0; n < N; ++n) {
            double prev = k == 0 ? 0.0 : hist[(k - 1) * N + n];
            hist[k * N + n] = k == 0 ? xv * p.b_bar[k][n]
                                     : prev * p.a_bar[k][n] + xv * p.b_bar[k][n];
        }
    }
    return hist;
}

DenseArray lag_fusion_scan(const FrozenSsm& p, const LagSpec& lags, const DenseArray& x) {
    check_scan_input(p, x);
    lags.validate();
    std::size_t K = p.K, N = p.N, H = x.cols();
    DenseArray y({K, H});
    std::vector<std::vector<double>> hist(K, std::vector<double>(N));
    std::vector<double> u(N);
    for (std::size_t ch = 0; ch < H; ++ch) {
        for (std::size_t k = 0; k < K; ++k) {
            double xv = x[k * H + ch];
            const DenseArray& ab = p.a_bar[k];
            const DenseArray& bb = p.b_bar[k];
            std::vector<double>& h = hist[k];
            if (k == 0) {
                for (std::size_t n = 0; n < N; ++n) h[n] = xv * bb[n];
            } else {
                for (std::size_t n = 0; n < N; ++n) h[n] = hist[k - 1][n] * ab[n] + xv * bb[n];
            }
            bool first = true;
            for (std::size_t pi = 0; pi < lags.lags.size(); ++pi) {
                std::size_t lag = lags.lags[pi];
                if (lag > k) continue;
                const std::vector<double>& hl = hist[k - lag];
                if (first) {
                    for (std::size_t n = 0; n < N; ++n) u[n] = lags.weights[pi] * hl[n];
                    first = false;
                } else {
                    for (std::size_t n = 0; n < N; ++n) u[n] += lags.weights[pi] * hl[n];
                }
            }
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) acc += u[n] * p.c[k][n];
            y[k * H + ch] = acc;
        }
    }
    return y;
}

DenseArray dilated_fusion(const DenseArray& states, const LagSpec& lags, std::size_t period) {
    if (period < 1) throw data_error("fusion period must be >= 1");
    if (states.ndim() != 2) throw data_error("dilated_fusion expects a [K x N] state matrix");
    if (lags.weights.size() != lags.dilation_factors.size() + 1)
        throw data_error("dilated_fusion needs one weight for lag 0 plus one per dilation factor");
    std::size_t K = states.rows(), N = states.cols();
    std::vector<std::size_t> offsets{0};
    for (std::size_t f : lags.dilation_factors) {
        if (f < 1) throw data_error("dilation factors must be >= 1");
        offsets.push_back(period * f);
    }
    DenseArray out({K, N});
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t p = 0; p < offsets.size(); ++p) {
            if (offsets[p] > k) continue;  // rows before the start are zero padding
            std::size_t src = k - offsets[p];
            for (std::size_t n = 0; n < N; ++n)
                out[k * N + n] += lags.weights[p] * states[src * N + n];
        }
    }
    return out;
}

bool is_permutation_matrix(const DenseArray& H) {
    if (H.ndim() != 2 || H.rows() != H.cols()) return false;
    std::size_t n = H.rows();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t row_ones = 0, col_ones = 0;
        for (std::size_t j = 0; j < n; ++j) {
            double r = H[i * n + j], c = H[j * n + i];
            if (r != 0.0 && r != 1.0) return false;
            if (r == 1.0) ++row_ones;
            if (c == 1.0) ++col_ones;
        }
        if (row_ones != 1 || col_ones != 1) return false;
    }
    return true;
}

std::vector<std::size_t> perm_from_matrix(const DenseArray& H) {
    if (!is_permutation_matrix(H)) throw data_error("H is not a permutation matrix");
    std::size_t n = H.rows();
    std::vector<std::size_t> pi(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            if (H[i * n + j] == 1.0) {
                pi[j] = i;
                break;
            }
        }
    }
    return pi;
}

DenseArray matrix_from_perm(const std::vector<std::size_t>& pi) {
    std::size_t n = pi.size();
    DenseArray H({n, n});
    for (std::size_t j = 0; j < n; ++j) {
        if (pi[j] >= n) throw data_error("permutation index out of range");
        H[pi[j] * n + j] = 1.0;
    }
    if (!is_permutation_matrix(H)) throw data_error("indices do not form a permutation");
    return H;
}

std::vector<std::size_t> invert_perm(const std::vector<std::size_t>& pi) {
    std::vector<std::size_t> inv(pi.size());
    for (std::size_t j = 0; j < pi.size(); ++j) inv[pi[j]] = j;
    return inv;
}

DenseArray permutation_scan(const FrozenSsm& p, const DenseArray& H, const DenseArray& x) {
    check_scan_input(p, x);
    std::vector<std::size_t> pi = perm_from_matrix(H);
    if (pi.size() != p.K) throw data_error("permutation size must match the scan length");
    std::vector<std::size_t> pinv = invert_perm(pi);

    std::size_t C = x.rows(), F = x.cols();
    DenseArray px({C, F});
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = 0; j < F; ++j) px[i * F + j] = x[pinv[i] * F + j];

    DenseArray y = selective_scan(p, px);

    DenseArray out({C, F});
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = 0; j < F; ++j) out[i * F + j] = y[pi[i] * F + j];
    return out;
}

DenseArray materialize_M(const FrozenSsm& p) {
    p.validate();
    std::size_t K = p.K, N = p.N;
    DenseArray M({K, K});
    std::vector<double> prod(N);
    for (std::size_t k = 0; k < K; ++k) {
        std::fill(prod.begin(), prod.end(), 1.0);
        for (std::size_t ii = 0; ii <= k; ++ii) {
            std::size_t i = k - ii;
            if (i < k) {
                for (std::size_t n = 0; n < N; ++n) prod[n] *= p.a_bar[i + 1][n];
            }
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) acc += p.c[k][n] * prod[n] * p.b_bar[i][n];
            M[k * K + i] = acc;
        }
    }
    return M;
}

DenseArray materialize_MF(const FrozenSsm& p, const LagSpec& lags) {
    p.validate();
    lags.validate();
    std::size_t K = p.K, N = p.N;
    DenseArray M({K, K});
    std::vector<double> prod(N);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t pi = 0; pi < lags.lags.size(); ++pi) {
            if (lags.lags[pi] > k) continue;
            std::size_t l = k - lags.lags[pi];
            double w = lags.weights[pi];
            std::fill(prod.begin(), prod.end(), 1.0);
            for (std::size_t ii = 0; ii <= l; ++ii) {
                std::size_t i = l - ii;
                if (i < l) {
                    for (std::size_t n = 0; n < N; ++n) prod[n] *= p.a_bar[i + 1][n];
                }
                double acc = 0.0;
                for (std::size_t n = 0; n < N; ++n) acc += p.c[k][n] * prod[n] * p.b_bar[i][n];
                M[k * K + i] += w * acc;
            }
        }
    }
    return M;
}

DenseArray materialize_MC(const FrozenSsm& p, const DenseArray& H) {
    std::vector<std::size_t> pi = perm_from_matrix(H);
    if (pi.size() != p.K) throw data_error("permutation size must match the scan length");
    DenseArray M = materialize_M(p);
    return matmul(matmul(transpose(H), M), H);
}

namespace {

struct SelectionRows {
    std::vector<ad::Tensor> a_bar;
    std::vector<ad::Tensor> b_bar;
    std::vector<ad::Tensor> c;
};

SelectionRows compute_selection(const SsmParams& p, const ad::Tensor& x) {
    std::size_t K = x.value().rows();
    ad::Tensor bmat = ad::add(ad::matmul(x, p.w_b), p.b_b);
    ad::Tensor cmat = ad::add(ad::matmul(x, p.w_c), p.b_c);
    ad::Tensor dt = ad::softplus(ad::add(ad::matmul(x, p.w_dt), p.b_dt));
    ad::Tensor A = ad::neg(ad::exp(p.a_log));

    SelectionRows sel;
    sel.a_bar.reserve(K);
    sel.b_bar.reserve(K);
    sel.c.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        ad::Tensor dk = ad::row(dt, k);                      // [1]
        ad::Tensor abar = ad::exp(ad::mul(A, dk));           // [N]
        ad::Tensor phi = ad::div(ad::affine(abar, 1.0, -1.0), A);
        sel.a_bar.push_back(abar);
        sel.b_bar.push_back(ad::mul(phi, ad::row(bmat, k)));
        sel.c.push_back(ad::row(cmat, k));
    }
    return sel;
}

std::vector<ad::Tensor> scan_states(const SelectionRows& sel, const ad::Tensor& x) {
    std::size_t K = x.value().rows();
    std::vector<ad::Tensor> hist;
    hist.reserve(K);
    ad::Tensor h;
    for (std::size_t k = 0; k < K; ++k) {
        ad::Tensor contrib = ad::outer(ad::row(x, k), sel.b_bar[k]);  // [d x N]
        h = k == 0 ? contrib : ad::add(ad::mul(h, sel.a_bar[k]), contrib);
        hist.push_back(h);
    }
    return hist;
}

void check_layer_input(const ad::Tensor& x) {
    if (x.value().ndim() != 2) throw data_error("scan input must be a [K x d] token matrix");
    if (!x.value().all_finite()) throw data_error("scan input contains non-finite values");
}

}  // namespace

ad::Tensor selective_scan(const SsmParams& p, const ad::Tensor& x) {
    check_layer_input(x);
    SelectionRows sel = compute_selection(p, x);
    std::vector<ad::Tensor> hist = scan_states(sel, x);
    std::vector<ad::Tensor> ys;
    ys.reserve(hist.size());
    for (std::size_t k = 0; k < hist.size(); ++k) ys.push_back(ad::matvec(hist[k], sel.c[k]));
    return ad::stack_rows(ys);
}

ad::Tensor lag_fusion_scan(const SsmParams& p, const std::vector<std::size_t>& lags,
                           const ad::Tensor& x) {
    check_layer_input(x);
    if (lags.empty() || lags[0] != 0) throw data_error("lag set must contain offset 0 first");
    if (p.eta.size() != lags.size()) throw data_error("eta size must match the lag set");
    SelectionRows sel = compute_selection(p, x);
    std::vector<ad::Tensor> hist = scan_states(sel, x);
    std::vector<ad::Tensor> ys;
    ys.reserve(hist.size());
    for (std::size_t k = 0; k < hist.size(); ++k) {
        ad::Tensor u;
        for (std::size_t pi = 0; pi < lags.size(); ++pi) {
            if (lags[pi] > k) continue;
            ad::Tensor term = ad::mul(hist[k - lags[pi]], ad::slice(p.eta, pi, 1));
            u = u.defined() ? ad::add(u, term) : term;
        }
        ys.push_back(ad::matvec(u, sel.c[k]));
    }
    return ad::stack_rows(ys);
}

ad::Tensor permutation_scan(const SsmParams& p, const std::vector<std::size_t>& pi,
                            const ad::Tensor& x) {
    check_layer_input(x);
    if (pi.size() != x.value().rows()) throw data_error("permutation size must match row count");
    std::vector<std::size_t> pinv = invert_perm(pi);
    ad::Tensor scanned = selective_scan(p, ad::gather_rows(x, pinv));
    return ad::gather_rows(scanned, pi);
}

FrozenSsm freeze(const SsmParams& p, const DenseArray& x) {
    ad::NoGradScope ng;
    ad::Tensor xt = ad::Tensor::constant(x);
    check_layer_input(xt);
    SelectionRows sel = compute_selection(p, xt);
    FrozenSsm f;
    f.K = x.rows();
    f.N = p.a_log.size();
    for (std::size_t k = 0; k < f.K; ++k) {
        f.a_bar.push_back(sel.a_bar[k].value());
        f.b_bar.push_back(sel.b_bar[k].value());
        f.c.push_back(sel.c[k].value());
    }
    return f;
}

}  // namespace dimts
