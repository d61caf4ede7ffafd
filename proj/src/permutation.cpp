#include "dimts/permutation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dimts/eig.hpp"
#include "dimts/errors.hpp"
#include "dimts/ssm.hpp"

namespace dimts {

void SimilarityMatrix::validate() const {
    if (G.ndim() != 2 || G.rows() != G.cols())
        throw data_error("similarity matrix must be square");
    std::size_t n = G.rows();
    for (std::size_t i = 0; i < n; ++i) {
        if (G[i * n + i] != 0.0) throw data_error("similarity diagonal must be zero");
        for (std::size_t j = 0; j < n; ++j) {
            double g = G[i * n + j];
            if (g < 0.0 || g > 1.0 + 1e-9)
                throw data_error("similarity entries must lie in [0,1]");
            if (std::abs(g - G[j * n + i]) > 1e-12)
                throw data_error("similarity matrix must be symmetric");
        }
    }
}

SimilarityMatrix pearson_similarity(const DenseArray& data) {
    std::size_t C = 0, R = 0;
    if (data.ndim() == 3) {
        C = data.shape()[2];
        R = data.shape()[0] * data.shape()[1];
    } else if (data.ndim() == 2) {
        C = data.shape()[1];
        R = data.shape()[0];
    } else {
        throw data_error("pearson_similarity expects [M x L x C] or [R x C] data");
    }
    if (R < 2) throw data_error("pearson_similarity needs at least two pooled rows");

    std::vector<double> mean(C, 0.0);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) mean[c] += data[r * C + c];
    for (std::size_t c = 0; c < C; ++c) mean[c] /= static_cast<double>(R);

    DenseArray cov({C, C});
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t i = 0; i < C; ++i) {
            double di = data[r * C + i] - mean[i];
            for (std::size_t j = i; j < C; ++j)
                cov[i * C + j] += di * (data[r * C + j] - mean[j]);
        }
    }
    for (std::size_t i = 0; i < C; ++i) {
        if (cov[i * C + i] <= 0.0)
            throw data_error("channel " + std::to_string(i) + " has zero variance");
    }

    SimilarityMatrix sim;
    sim.G = DenseArray({C, C});
    for (std::size_t i = 0; i < C; ++i) {
        for (std::size_t j = i + 1; j < C; ++j) {
            double g = std::abs(cov[i * C + j]) / std::sqrt(cov[i * C + i] * cov[j * C + j]);
            g = std::min(g, 1.0);
            sim.G[i * C + j] = g;
            sim.G[j * C + i] = g;
        }
    }
    return sim;
}

ChannelPermutation solve_ordering(const SimilarityMatrix& sim) {
    sim.validate();
    std::size_t C = sim.channels();
    const DenseArray& G = sim.G;

    DenseArray D({C, C}), L({C, C});
    for (std::size_t i = 0; i < C; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < C; ++j) deg += G[i * C + j];
        D[i * C + i] = deg;
        for (std::size_t j = 0; j < C; ++j) L[i * C + j] = (i == j ? deg : 0.0) - G[i * C + j];
    }

    ChannelPermutation out;
    out.pi.resize(C);
    std::iota(out.pi.begin(), out.pi.end(), std::size_t{0});
    try {
        GeneralizedEigResult eig = generalized_eig_smallest(L, D);
        out.fiedler = eig.v;
        out.lambda = eig.lambda;
        std::stable_sort(out.pi.begin(), out.pi.end(), [&](std::size_t a, std::size_t b) {
            if (eig.v[a] != eig.v[b]) return eig.v[a] < eig.v[b];
            return a < b;
        });
    } catch (const Error&) {
        out.fiedler = DenseArray({C});
        out.fallback = true;
    }
    out.H = matrix_from_perm(out.pi);
    out.objective = eval_ordering_objective(out.fiedler, sim);
    return out;
}

double eval_ordering_objective(const DenseArray& v, const SimilarityMatrix& sim) {
    std::size_t C = sim.channels();
    if (v.size() != C) throw data_error("objective vector length must match channel count");
    double acc = 0.0;
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            double d = v[i] - v[j];
            acc += d * d * sim.G[i * C + j];
        }
    return acc;
}

double adjacent_similarity(const std::vector<std::size_t>& pi, const SimilarityMatrix& sim) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < pi.size(); ++k)
        acc += sim.G[pi[k] * sim.channels() + pi[k + 1]];
    return acc;
}

}  // namespace dimts
