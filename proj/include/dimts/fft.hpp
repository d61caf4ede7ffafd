#pragma once

#include "dimts/array.hpp"

namespace dimts {

/// Unnormalized forward DFT of a real vector: X_k = sum_j x_j exp(-2*pi*i*jk/n).
/// Radix-2 Cooley-Tukey when n is a power of two, direct summation otherwise.
ComplexArray dft_forward(const DenseArray& x);

/// Direct O(n^2) summation, kept as the oracle for the fast path.
ComplexArray dft_naive(const DenseArray& x);

}  // namespace dimts
