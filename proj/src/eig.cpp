#include "dimts/eig.hpp"

#include <cmath>
#include <limits>

#include "dimts/errors.hpp"

namespace dimts {

void jacobi_eigh(const DenseArray& S, DenseArray& vals, DenseArray& vecs) {
    std::size_t n = S.rows();
    if (S.cols() != n) throw numeric_error("jacobi_eigh expects a square matrix");
    DenseArray a = S;
    vecs = DenseArray::identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += a[i * n + j] * a[i * n + j];
        return std::sqrt(2.0 * s);
    };

    double scale = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(a[i]));
    if (scale == 0.0) {
        vals = DenseArray({n});
        return;
    }
    double tol = 1e-14 * scale * static_cast<double>(n);

    for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (std::abs(apq) <= tol / static_cast<double>(n * n)) continue;
                double app = a[p * n + p], aqq = a[q * n + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = vecs[k * n + p], vkq = vecs[k * n + q];
                    vecs[k * n + p] = c * vkp - s * vkq;
                    vecs[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    vals = DenseArray({n});
    for (std::size_t i = 0; i < n; ++i) vals[i] = a[i * n + i];
}

GeneralizedEigResult generalized_eig_smallest(const DenseArray& L, const DenseArray& D,
                                              double zero_threshold, std::size_t cap) {
    std::size_t n = L.rows();
    if (L.cols() != n || D.rows() != n || D.cols() != n)
        throw numeric_error("generalized_eig_smallest expects square L and D of equal size");
    if (n > cap)
        throw numeric_error("problem size " + std::to_string(n) + " exceeds cap " +
                            std::to_string(cap));

    DenseArray dinv_sqrt({n});
    for (std::size_t i = 0; i < n; ++i) {
        double d = D[i * n + i];
        if (d <= 0.0)
            throw numeric_error("singular D: diagonal entry " + std::to_string(i) +
                                " is not positive");
        dinv_sqrt[i] = 1.0 / std::sqrt(d);
    }

    // Symmetric reduction: solve (D^-1/2 L D^-1/2) w = lambda w, v = D^-1/2 w.
    DenseArray S({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            S[i * n + j] = dinv_sqrt[i] * L[i * n + j] * dinv_sqrt[j];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double m = 0.5 * (S[i * n + j] + S[j * n + i]);
            S[i * n + j] = m;
            S[j * n + i] = m;
        }

    DenseArray vals, vecs;
    jacobi_eigh(S, vals, vecs);

    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (vals[i] > zero_threshold && (best == n || vals[i] < vals[best])) best = i;
    }
    if (best == n)
        throw numeric_error("degenerate eigenproblem: no eigenvalue above threshold " +
                            std::to_string(zero_threshold));

    GeneralizedEigResult res;
    res.lambda = vals[best];
    res.v = DenseArray({n});
    for (std::size_t i = 0; i < n; ++i) res.v[i] = dinv_sqrt[i] * vecs[i * n + best];

    // v' D v = w' w = 1 already holds for the unit Jacobi eigenvector; fix sign.
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(res.v[i]) > 1e-12) {
            if (res.v[i] < 0.0)
                for (std::size_t j = 0; j < n; ++j) res.v[j] = -res.v[j];
            break;
        }
    }
    return res;
}

}  // namespace dimts
