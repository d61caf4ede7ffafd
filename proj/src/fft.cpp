#include "dimts/fft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "dimts/errors.hpp"

namespace dimts {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& a) {
    std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

}  // namespace

ComplexArray dft_naive(const DenseArray& x) {
    if (x.ndim() != 1 || x.size() == 0) throw numeric_error("dft expects a non-empty 1-D input");
    std::size_t n = x.size();
    DenseArray re({n}), im({n});
    for (std::size_t k = 0; k < n; ++k) {
        double sr = 0.0, si = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double ang = -2.0 * std::numbers::pi * static_cast<double>(j) * static_cast<double>(k) /
                         static_cast<double>(n);
            sr += x[j] * std::cos(ang);
            si += x[j] * std::sin(ang);
        }
        re[k] = sr;
        im[k] = si;
    }
    return ComplexArray(std::move(re), std::move(im));
}

ComplexArray dft_forward(const DenseArray& x) {
    if (x.ndim() != 1 || x.size() == 0) throw numeric_error("dft expects a non-empty 1-D input");
    std::size_t n = x.size();
    if (!is_pow2(n)) return dft_naive(x);
    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = {x[i], 0.0};
    fft_radix2(a);
    DenseArray re({n}), im({n});
    for (std::size_t i = 0; i < n; ++i) {
        re[i] = a[i].real();
        im[i] = a[i].imag();
    }
    return ComplexArray(std::move(re), std::move(im));
}

}  // namespace dimts
