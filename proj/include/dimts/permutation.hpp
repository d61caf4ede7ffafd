#pragma once

#include <cstddef>
#include <vector>

#include "dimts/array.hpp"

namespace dimts {

/// Channel similarity: symmetric, non-negative, zero diagonal.
struct SimilarityMatrix {
    DenseArray G;  // [C x C]

    std::size_t channels() const { return G.rows(); }
    void validate() const;
};

struct ChannelPermutation {
    std::vector<std::size_t> pi;  // scan order, pi[j] = channel at position j
    DenseArray H;                 // H_{ij} = 1 iff i = pi[j]
    DenseArray fiedler;           // mapping vector the order was read from
    double lambda = 0.0;
    double objective = 0.0;       // sum_{ij} (v_i - v_j)^2 g_ij on the fiedler vector
    bool fallback = false;        // degenerate similarity, identity order used
};

/// Absolute pooled Pearson correlation between channels. `data` is either a
/// windowed tensor [M x L x C] or an already-pooled [R x C] matrix.
SimilarityMatrix pearson_similarity(const DenseArray& data);

/// Orders channels by sorting the generalized Laplacian eigenvector (L = D - G,
/// L v = lambda D v, smallest eigenvalue above threshold). Falls back to the
/// identity order with `fallback` set when the problem is degenerate.
ChannelPermutation solve_ordering(const SimilarityMatrix& sim);

double eval_ordering_objective(const DenseArray& v, const SimilarityMatrix& sim);

/// Sum of similarities between channels adjacent in the scan order.
double adjacent_similarity(const std::vector<std::size_t>& pi, const SimilarityMatrix& sim);

}  // namespace dimts
