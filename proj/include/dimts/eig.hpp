#pragma once

#include <utility>

#include "dimts/array.hpp"

namespace dimts {

/// Full eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
/// `vecs` columns are the eigenvectors matching `vals` (unsorted).
void jacobi_eigh(const DenseArray& S, DenseArray& vals, DenseArray& vecs);

struct GeneralizedEigResult {
    double lambda = 0.0;
    DenseArray v;  // normalized so v' D v = 1, first nonzero entry positive
};

/// Smallest eigenpair of L v = lambda D v strictly above `zero_threshold`.
/// L must be symmetric PSD, D diagonal with positive entries. Throws a
/// numeric error on singular D, on n above `cap`, and when every eigenvalue
/// sits below the threshold (degenerate problem).
GeneralizedEigResult generalized_eig_smallest(const DenseArray& L, const DenseArray& D,
                                              double zero_threshold = 1e-8,
                                              std::size_t cap = 256);

}  // namespace dimts
