#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dimts/array.hpp"
#include "dimts/autodiff.hpp"
#include "dimts/eig.hpp"
#include "dimts/errors.hpp"
#include "dimts/fft.hpp"
#include "dimts/rng.hpp"
#include "test_util.hpp"

using namespace dimts;
using testutil::fd_max_rel_error;

TEST_CASE("dense array basics") {
    DenseArray a({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(a.size() == 6);
    CHECK(a.ndim() == 2);
    CHECK(a.at(1, 2) == 6.0);
    CHECK_THROWS_AS(DenseArray({2, 2}, {1.0, 2.0}), Error);
    CHECK_THROWS_AS(a.reshaped({5}), Error);
    DenseArray r = a.reshaped({3, 2});
    CHECK(r.at(2, 1) == 6.0);
    CHECK(DenseArray::identity(3).at(1, 1) == 1.0);
    CHECK(DenseArray::identity(3).at(0, 1) == 0.0);
}

TEST_CASE("plain matmul and transpose") {
    DenseArray a({2, 2}, {1, 2, 3, 4});
    DenseArray b({2, 1}, {1, 1});
    DenseArray c = matmul(a, b);
    CHECK(c[0] == doctest::Approx(3.0));
    CHECK(c[1] == doctest::Approx(7.0));

    DenseArray x({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(max_abs_diff(matmul(DenseArray::identity(3), x), x) == 0.0);

    DenseArray t = transpose(a);
    CHECK(t.at(0, 1) == 3.0);
    CHECK_THROWS_AS(matmul(a, x), Error);

    DenseArray u({2}, {2.0, 3.0});
    DenseArray v({3}, {1.0, 0.0, -1.0});
    DenseArray o = outer(u, v);
    CHECK(o.at(1, 2) == doctest::Approx(-3.0));
    CHECK(max_abs_diff(matvec(a, u), DenseArray({2}, {8.0, 18.0})) == 0.0);
}

TEST_CASE("rng determinism and counter state") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(7);
    for (int i = 0; i < 5; ++i) c.normal();
    Rng resumed(7, c.counter());
    CHECK(resumed.normal() == c.normal());

    Rng d(7), e(8);
    CHECK(d.next_u64() != e.next_u64());
    CHECK(Rng::stream(1, 0).next_u64() != Rng::stream(1, 1).next_u64());
}

TEST_CASE("rng moments") {
    Rng r(123);
    double sum = 0.0, sq = 0.0;
    int n = 20000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double z = r.normal();
        sum += z;
        sq += z * z;
    }
    double m = sum / n, v = sq / n - m * m;
    CHECK(std::abs(m) < 0.03);
    CHECK(std::abs(v - 1.0) < 0.05);

    Rng ri(9);
    for (int i = 0; i < 200; ++i) CHECK(ri.uniform_int(7) < 7);
}

TEST_CASE("elementwise forward values") {
    auto a = ad::Tensor::constant(DenseArray({2}, {1.0, 2.0}));
    auto b = ad::Tensor::constant(DenseArray({2}, {3.0, 4.0}));
    auto s = ad::add(a, b);
    CHECK(s.value()[0] == 4.0);
    CHECK(s.value()[1] == 6.0);

    auto x = ad::Tensor::leaf(DenseArray({3}, {1.0, -2.0, 0.5}));
    auto ones = ad::Tensor::constant(DenseArray({3}, 1.0));
    auto prod = ad::mul(x, ones);
    CHECK(max_abs_diff(prod.value(), x.value()) == 0.0);
    ad::backward(ad::sum(prod));
    CHECK(max_abs_diff(x.grad(), DenseArray({3}, 1.0)) == 0.0);
}

TEST_CASE("grad of sum(a*b) wrt a equals b") {
    Rng r(11);
    auto a = ad::Tensor::leaf(r.uniform_array({3}, -1.0, 1.0));
    auto b = ad::Tensor::constant(r.uniform_array({3}, -1.0, 1.0));
    ad::backward(ad::sum(ad::mul(a, b)));
    CHECK(max_abs_diff(a.grad(), b.value()) < 1e-15);
}

TEST_CASE("backward basics") {
    auto x = ad::Tensor::leaf(DenseArray({3}, {1.0, 2.0, 3.0}));
    ad::backward(ad::sum(ad::square(x)));
    CHECK(max_abs_diff(x.grad(), DenseArray({3}, {2.0, 4.0, 6.0})) < 1e-15);

    auto c = ad::Tensor::constant(DenseArray({1}, {5.0}));
    ad::backward(c);  // no-op: nothing requires grad
    CHECK(c.grad().empty());

    auto y = ad::Tensor::leaf(DenseArray({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(ad::backward(ad::exp(y)), Error);
}

TEST_CASE("suffix broadcasting") {
    auto a = ad::Tensor::leaf(DenseArray({2, 3}, {1, 2, 3, 4, 5, 6}));
    auto b = ad::Tensor::leaf(DenseArray({3}, {10, 20, 30}));
    auto out = ad::add(a, b);
    CHECK(out.value().at(1, 2) == 36.0);
    ad::backward(ad::sum(out));
    CHECK(max_abs_diff(b.grad(), DenseArray({3}, 2.0)) == 0.0);
    CHECK(max_abs_diff(a.grad(), DenseArray({2, 3}, 1.0)) == 0.0);

    auto s = ad::Tensor::leaf(DenseArray({1}, {2.0}));
    auto scaled = ad::mul(a, s);
    CHECK(scaled.value().at(0, 1) == 4.0);

    auto bad = ad::Tensor::constant(DenseArray({2}, {1.0, 1.0}));
    CHECK_THROWS_AS(ad::add(a, bad), Error);
}

TEST_CASE("no-grad scope folds constants") {
    auto x = ad::Tensor::leaf(DenseArray({2}, {1.0, 2.0}));
    {
        ad::NoGradScope ng;
        CHECK_FALSE(ad::grad_enabled());
        auto y = ad::mul(x, x);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(ad::grad_enabled());
    CHECK(ad::mul(x, x).requires_grad());
}

TEST_CASE("finite-difference checks for every differentiable op") {
    Rng r(2024);
    auto randleaf = [&](Shape s) { return ad::Tensor::leaf(r.uniform_array(std::move(s), -1.0, 1.0)); };

    SUBCASE("binary elementwise") {
        std::vector<ad::Tensor> ls{randleaf({2, 3}), randleaf({3})};
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::add(ls[0], ls[1])); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::sub(ls[0], ls[1])); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::mul(ls[0], ls[1])); }) < 1e-4);
        std::vector<ad::Tensor> ld{randleaf({2, 3}),
                                   ad::Tensor::leaf(r.uniform_array({3}, 0.5, 1.5))};
        CHECK(fd_max_rel_error(ld, [&] { return ad::mean(ad::div(ld[0], ld[1])); }) < 1e-4);
    }

    SUBCASE("unary elementwise") {
        std::vector<ad::Tensor> ls{randleaf({6})};
        auto& x = ls[0];
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::neg(x)); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::affine(x, 2.5, -0.25)); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::square(x)); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::exp(x)); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::tanh(x)); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::sigmoid(x)); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::softplus(x)); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::silu(x)); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::gelu(x)); }) < 1e-4);

        std::vector<ad::Tensor> lp{ad::Tensor::leaf(r.uniform_array({6}, 0.5, 2.0))};
        CHECK(fd_max_rel_error(lp, [&] { return ad::mean(ad::sqrt(lp[0])); }) < 1e-4);
    }

    SUBCASE("matmul matches finite differences on random 4x4") {
        std::vector<ad::Tensor> ls{randleaf({4, 4}), randleaf({4, 4})};
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::matmul(ls[0], ls[1])); }) < 1e-5);
    }

    SUBCASE("linear algebra ops") {
        std::vector<ad::Tensor> ls{randleaf({3, 4}), randleaf({4})};
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::matvec(ls[0], ls[1])); }) < 1e-4);
        std::vector<ad::Tensor> lo{randleaf({3}), randleaf({4})};
        CHECK(fd_max_rel_error(lo, [&] { return ad::mean(ad::outer(lo[0], lo[1])); }) < 1e-4);
        std::vector<ad::Tensor> lt{randleaf({3, 4})};
        CHECK(fd_max_rel_error(lt, [&] {
                  return ad::mean(ad::mul(ad::transpose(lt[0]), ad::transpose(lt[0])));
              }) < 1e-4);
    }

    SUBCASE("structural ops") {
        std::vector<ad::Tensor> ls{randleaf({4, 3})};
        auto& x = ls[0];
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::square(ad::row(x, 2))); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] {
                  return ad::mean(ad::square(ad::gather_rows(x, {1, 1, 3, 0})));
              }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::square(ad::reverse_rows(x))); }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] {
                  return ad::mean(ad::square(ad::reshape(x, {2, 6})));
              }) < 1e-4);
        CHECK(fd_max_rel_error(ls, [&] {
                  std::vector<ad::Tensor> rows{ad::row(x, 0), ad::row(x, 2)};
                  return ad::mean(ad::square(ad::stack_rows(rows)));
              }) < 1e-4);

        std::vector<ad::Tensor> lv{randleaf({8})};
        CHECK(fd_max_rel_error(lv, [&] {
                  return ad::mean(ad::square(ad::slice(lv[0], 2, 4)));
              }) < 1e-4);
        CHECK(fd_max_rel_error(lv, [&] { return ad::sum(ad::square(lv[0])); }) < 1e-4);
    }

    SUBCASE("layer norm") {
        std::vector<ad::Tensor> ls{randleaf({3, 5})};
        CHECK(fd_max_rel_error(ls, [&] {
                  auto y = ad::layer_norm_rows(ls[0]);
                  return ad::mean(ad::mul(y, ad::exp(y)));
              }) < 1e-4);
    }

    SUBCASE("dft") {
        std::vector<ad::Tensor> ls{randleaf({8})};
        CHECK(fd_max_rel_error(ls, [&] { return ad::mean(ad::square(ad::dft(ls[0]))); }) < 1e-4);
        std::vector<ad::Tensor> lo{randleaf({6})};
        CHECK(fd_max_rel_error(lo, [&] { return ad::mean(ad::square(ad::dft(lo[0]))); }) < 1e-4);
    }

    SUBCASE("three-layer composition") {
        std::vector<ad::Tensor> ls{randleaf({4, 4}), randleaf({4, 4}), randleaf({4})};
        CHECK(fd_max_rel_error(ls, [&] {
                  auto h1 = ad::tanh(ad::matmul(ls[0], ls[1]));
                  auto h2 = ad::silu(ad::matvec(h1, ls[2]));
                  return ad::mean(ad::square(h2));
              }) < 1e-4);
    }
}

TEST_CASE("dft known values") {
    ComplexArray c = dft_forward(DenseArray({4}, 1.0));
    CHECK(c.re[0] == doctest::Approx(4.0));
    for (int k = 1; k < 4; ++k) CHECK(std::abs(c.re[k]) < 1e-12);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(c.im[k]) < 1e-12);

    ComplexArray imp = dft_forward(DenseArray({4}, {1.0, 0.0, 0.0, 0.0}));
    for (int k = 0; k < 4; ++k) {
        CHECK(imp.re[k] == doctest::Approx(1.0));
        CHECK(std::abs(imp.im[k]) < 1e-12);
    }
}

TEST_CASE("dft fast path equals naive summation") {
    Rng r(5);
    for (std::size_t n : {2u, 4u, 8u, 16u, 32u}) {
        DenseArray x = r.uniform_array({n}, -1.0, 1.0);
        ComplexArray fast = dft_forward(x);
        ComplexArray naive = dft_naive(x);
        CHECK(max_abs_diff(fast.re, naive.re) < 1e-10);
        CHECK(max_abs_diff(fast.im, naive.im) < 1e-10);
    }
}

TEST_CASE("parseval identity") {
    Rng r(6);
    for (std::size_t n : {12u, 16u}) {
        DenseArray x = r.uniform_array({n}, -1.0, 1.0);
        ComplexArray F = dft_forward(x);
        double time_energy = 0.0, freq_energy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            time_energy += x[i] * x[i];
            freq_energy += F.re[i] * F.re[i] + F.im[i] * F.im[i];
        }
        CHECK(std::abs(time_energy - freq_energy / static_cast<double>(n)) < 1e-9);
    }
}

TEST_CASE("dft op forward matches plain transform") {
    Rng r(7);
    DenseArray x = r.uniform_array({8}, -1.0, 1.0);
    auto t = ad::dft(ad::Tensor::constant(x));
    ComplexArray F = dft_forward(x);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(t.value()[i] == doctest::Approx(F.re[i]));
        CHECK(t.value()[8 + i] == doctest::Approx(F.im[i]));
    }
}

TEST_CASE("eigensolver closed-form 2-node case") {
    DenseArray L({2, 2}, {1.0, -1.0, -1.0, 1.0});
    DenseArray D = DenseArray::identity(2);
    auto res = generalized_eig_smallest(L, D);
    CHECK(res.lambda == doctest::Approx(2.0).epsilon(1e-12));
    double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    CHECK(res.v[0] == doctest::Approx(inv_sqrt2));
    CHECK(res.v[1] == doctest::Approx(-inv_sqrt2));
}

TEST_CASE("eigensolver residual and normalization on random problems") {
    Rng r(31);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t n = 3 + r.uniform_int(5);
        DenseArray a = r.uniform_array({n, n}, -1.0, 1.0);
        DenseArray L = matmul(transpose(a), a);  // symmetric PSD
        DenseArray D({n, n});
        for (std::size_t i = 0; i < n; ++i) D[i * n + i] = 0.5 + r.uniform01();

        auto res = generalized_eig_smallest(L, D);
        CHECK(res.lambda > 1e-8);

        DenseArray lv = matvec(L, res.v);
        double resid = 0.0, vdv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            resid = std::max(resid, std::abs(lv[i] - res.lambda * D[i * n + i] * res.v[i]));
            vdv += res.v[i] * D[i * n + i] * res.v[i];
        }
        CHECK(resid < 1e-8);
        CHECK(std::abs(vdv - 1.0) < 1e-10);
    }
}

TEST_CASE("eigensolver error cases") {
    DenseArray zero({3, 3});
    CHECK_THROWS_AS(generalized_eig_smallest(zero, DenseArray::identity(3)), Error);

    DenseArray L({2, 2}, {1.0, -1.0, -1.0, 1.0});
    DenseArray badD({2, 2}, {1.0, 0.0, 0.0, 0.0});
    CHECK_THROWS_AS(generalized_eig_smallest(L, badD), Error);

    DenseArray big = DenseArray::identity(5);
    CHECK_THROWS_AS(generalized_eig_smallest(big, big, 1e-8, 4), Error);
}
