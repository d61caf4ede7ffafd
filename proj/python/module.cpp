// Python bindings for the main operations: scan kernels and their matrix
// materializations, channel ordering, the noise schedule, losses, metrics
// and the DFT. Arrays cross the boundary as float64 numpy buffers.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "dimts/array.hpp"
#include "dimts/diffusion.hpp"
#include "dimts/errors.hpp"
#include "dimts/fft.hpp"
#include "dimts/losses.hpp"
#include "dimts/metrics.hpp"
#include "dimts/permutation.hpp"
#include "dimts/ssm.hpp"

namespace py = pybind11;
using namespace dimts;

namespace {

using NpArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseArray to_dense(const NpArray& a) {
    Shape shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return DenseArray(std::move(shape), std::move(data));
}

NpArray from_dense(const DenseArray& a) {
    std::vector<py::ssize_t> shape(a.ndim());
    for (std::size_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<py::ssize_t>(a.dim(i));
    NpArray out(shape);
    std::copy(a.data(), a.data() + a.size(), out.mutable_data());
    return out;
}

FrozenSsm frozen_from(const NpArray& a_bar, const NpArray& b_bar, const NpArray& c) {
    DenseArray da = to_dense(a_bar), db = to_dense(b_bar), dc = to_dense(c);
    if (da.ndim() != 2 || !da.same_shape(db) || !da.same_shape(dc))
        throw data_error("a_bar, b_bar, c must share a [K, N] shape");
    FrozenSsm p;
    p.K = da.dim(0);
    p.N = da.dim(1);
    for (std::size_t k = 0; k < p.K; ++k) {
        DenseArray ra({p.N}), rb({p.N}), rc({p.N});
        for (std::size_t n = 0; n < p.N; ++n) {
            ra[n] = da.at(k, n);
            rb[n] = db.at(k, n);
            rc[n] = dc.at(k, n);
        }
        p.a_bar.push_back(ra);
        p.b_bar.push_back(rb);
        p.c.push_back(rc);
    }
    return p;
}

std::vector<ad::Tensor> scalars(const std::vector<double>& v) {
    std::vector<ad::Tensor> out;
    out.reserve(v.size());
    for (double x : v) out.push_back(ad::Tensor::scalar(x));
    return out;
}

}  // namespace

PYBIND11_MODULE(_dimts, m) {
    m.doc() = "selective-scan diffusion for multichannel time series";

    py::register_exception<Error>(m, "DimtsError");

    // -- scan kernels ------------------------------------------------------
    m.def(
        "discretize",
        [](const NpArray& A, const NpArray& B, double dt) {
            auto [a_bar, b_bar] = discretize(to_dense(A), to_dense(B), dt);
            return py::make_tuple(from_dense(a_bar), from_dense(b_bar));
        },
        py::arg("A"), py::arg("B"), py::arg("dt"),
        "Zero-order-hold discretization of a diagonal continuous system");

    m.def(
        "selective_scan",
        [](const NpArray& a_bar, const NpArray& b_bar, const NpArray& c, const NpArray& x) {
            return from_dense(selective_scan(frozen_from(a_bar, b_bar, c), to_dense(x)));
        },
        py::arg("a_bar"), py::arg("b_bar"), py::arg("c"), py::arg("x"),
        "Sequential selective-state scan over [K, H] inputs");

    m.def(
        "lag_fusion_scan",
        [](const NpArray& a_bar, const NpArray& b_bar, const NpArray& c, const NpArray& x,
           const std::vector<std::size_t>& lags, const std::vector<double>& weights) {
            LagSpec spec;
            spec.lags = lags;
            spec.weights = weights;
            return from_dense(lag_fusion_scan(frozen_from(a_bar, b_bar, c), spec, to_dense(x)));
        },
        py::arg("a_bar"), py::arg("b_bar"), py::arg("c"), py::arg("x"), py::arg("lags"),
        py::arg("weights"), "Scan with weighted fusion of lagged latent states");

    m.def(
        "permutation_scan",
        [](const NpArray& a_bar, const NpArray& b_bar, const NpArray& c, const NpArray& x,
           const std::vector<std::size_t>& pi) {
            return from_dense(permutation_scan(frozen_from(a_bar, b_bar, c),
                                               matrix_from_perm(pi), to_dense(x)));
        },
        py::arg("a_bar"), py::arg("b_bar"), py::arg("c"), py::arg("x"), py::arg("pi"),
        "Scan token rows in permuted order, restoring the original order");

    m.def(
        "materialize",
        [](const NpArray& a_bar, const NpArray& b_bar, const NpArray& c) {
            return from_dense(materialize_M(frozen_from(a_bar, b_bar, c)));
        },
        py::arg("a_bar"), py::arg("b_bar"), py::arg("c"),
        "Dense [K, K] matrix with the same action as the scan");

    m.def("default_fusion_period", &default_fusion_period, py::arg("length"),
          "Divisor of length nearest floor(sqrt(length)), ties to the larger");

    // -- channel ordering -----------------------------------------------------
    m.def(
        "pearson_similarity",
        [](const NpArray& data) { return from_dense(pearson_similarity(to_dense(data)).G); },
        py::arg("data"),
        "Absolute pooled Pearson similarity between channels of [M, L, C] or [R, C] data");

    m.def(
        "solve_ordering",
        [](const NpArray& similarity) {
            SimilarityMatrix sim;
            sim.G = to_dense(similarity);
            ChannelPermutation perm = solve_ordering(sim);
            py::dict out;
            out["pi"] = perm.pi;
            out["fiedler"] = from_dense(perm.fiedler);
            out["lambda"] = perm.lambda;
            out["objective"] = perm.objective;
            out["fallback"] = perm.fallback;
            return out;
        },
        py::arg("similarity"), "Spectral channel ordering from a similarity matrix");

    // -- diffusion -----------------------------------------------------------
    m.def(
        "cosine_schedule",
        [](std::size_t T) {
            DiffusionSchedule s = cosine_schedule(T);
            py::dict out;
            out["beta"] = py::cast(s.beta);
            out["alpha"] = py::cast(s.alpha);
            out["alpha_bar"] = py::cast(s.alpha_bar);
            return out;
        },
        py::arg("T"), "Squared-cosine noise schedule tables, 1-indexed by step");

    // -- losses and spectra ---------------------------------------------------
    m.def(
        "mmd",
        [](const std::vector<double>& x, const std::vector<double>& y, double sigma) {
            return mmd(scalars(x), scalars(y), sigma).item();
        },
        py::arg("x"), py::arg("y"), py::arg("sigma"),
        "Biased squared MMD with a Gaussian RBF kernel");

    m.def(
        "fourier_loss",
        [](const NpArray& x0, const NpArray& x_out) {
            return fourier_loss(ad::Tensor::constant(to_dense(x0)),
                                ad::Tensor::constant(to_dense(x_out)))
                .item();
        },
        py::arg("x0"), py::arg("x_out"),
        "Squared complex-difference norm of per-channel DFTs, averaged over channels");

    m.def(
        "dft",
        [](const NpArray& x) {
            ComplexArray X = dft_forward(to_dense(x));
            return py::make_tuple(from_dense(X.re), from_dense(X.im));
        },
        py::arg("x"), "Unnormalized forward DFT of a real vector");

    // -- metrics ---------------------------------------------------------------
    m.def(
        "evaluate",
        [](const NpArray& real, const NpArray& synthetic, std::size_t bins, std::size_t max_lag,
           const std::string& distance) {
            DatasetPair pair;
            pair.real = to_dense(real);
            pair.synthetic = to_dense(synthetic);
            MetricOptions opt;
            opt.bins = bins;
            opt.max_lag = max_lag;
            opt.distance = parse_distance(distance);
            return evaluate_all(pair, opt).to_json();
        },
        py::arg("real"), py::arg("synthetic"), py::arg("bins") = 50, py::arg("max_lag") = 0,
        py::arg("distance") = "js",
        "Seven-metric comparison of [M, L, C] window sets; returns a JSON report");
}
