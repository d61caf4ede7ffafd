#include "dimts/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <unordered_set>
#include <utility>

#include "dimts/errors.hpp"
#include "dimts/fft.hpp"

namespace dimts::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

NodePtr make_node(DenseArray value) {
    auto n = std::make_shared<Node>();
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    n->value = std::move(value);
    return n;
}

Tensor make_op(DenseArray value, std::vector<NodePtr> parents,
               std::function<void(const DenseArray&)> fn) {
    NodePtr n = make_node(std::move(value));
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) needs = needs || p->requires_grad;
    }
    if (needs) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
    return Tensor(n);
}

// `small` must be a scalar or its shape a trailing suffix of `big`.
void check_broadcast(const DenseArray& big, const DenseArray& small, const char* op) {
    if (small.size() == 1) return;
    const Shape& bs = big.shape();
    const Shape& ss = small.shape();
    bool ok = ss.size() <= bs.size();
    if (ok) {
        for (std::size_t i = 0; i < ss.size(); ++i) {
            if (bs[bs.size() - ss.size() + i] != ss[i]) ok = false;
        }
    }
    if (!ok) {
        throw numeric_error(std::string(op) + ": shape " + shape_str(ss) +
                            " does not broadcast over " + shape_str(bs));
    }
}

template <class F, class DFA, class DFB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F f, DFA dfa, DFB dfb) {
    const DenseArray& av = a.value();
    const DenseArray& bv = b.value();
    const DenseArray& big = av.size() >= bv.size() ? av : bv;
    const DenseArray& small = av.size() >= bv.size() ? bv : av;
    check_broadcast(big, small, name);
    std::size_t n = big.size(), an = av.size(), bn = bv.size();
    DenseArray out(big.shape());
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i % an], bv[i % bn]);

    NodePtr na = a.node(), nb = b.node();
    auto fn = [na, nb, n, an, bn, dfa, dfb](const DenseArray& g) {
        if (na->requires_grad) {
            DenseArray ga(na->value.shape());
            for (std::size_t i = 0; i < n; ++i)
                ga[i % an] += g[i] * dfa(na->value[i % an], nb->value[i % bn]);
            accumulate_grad(*na, ga);
        }
        if (nb->requires_grad) {
            DenseArray gb(nb->value.shape());
            for (std::size_t i = 0; i < n; ++i)
                gb[i % bn] += g[i] * dfb(na->value[i % an], nb->value[i % bn]);
            accumulate_grad(*nb, gb);
        }
    };
    return make_op(std::move(out), {na, nb}, std::move(fn));
}

// df receives (input, output) so ops like exp reuse the forward value.
template <class F, class DF>
Tensor unary_op(const Tensor& a, const char* /*name*/, F f, DF df) {
    const DenseArray& av = a.value();
    DenseArray out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);

    NodePtr na = a.node();
    DenseArray yv = out;
    auto fn = [na, yv = std::move(yv), df](const DenseArray& g) {
        if (!na->requires_grad) return;
        DenseArray ga(na->value.shape());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = g[i] * df(na->value[i], yv[i]);
        accumulate_grad(*na, ga);
    };
    return make_op(std::move(out), {na}, std::move(fn));
}

double sigmoid_val(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double softplus_val(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

}  // namespace

void accumulate_grad(Node& n, const DenseArray& g) {
    if (!n.requires_grad) return;
    if (n.grad.empty()) n.grad = DenseArray(n.value.shape());
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

Tensor Tensor::constant(DenseArray v) { return Tensor(make_node(std::move(v))); }

Tensor Tensor::leaf(DenseArray v) {
    NodePtr n = make_node(std::move(v));
    n->requires_grad = true;
    return Tensor(n);
}

double Tensor::item() const {
    if (size() != 1) throw numeric_error("item() requires a scalar tensor, got " + shape_str(shape()));
    return value()[0];
}

void Tensor::zero_grad() {
    if (node_) node_->grad = DenseArray();
}

NoGradScope::NoGradScope() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradScope::~NoGradScope() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
    return unary_op(
        a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor affine(const Tensor& a, double k, double c) {
    return unary_op(
        a, "affine", [k, c](double x) { return k * x + c; }, [k](double, double) { return k; });
}

Tensor square(const Tensor& a) {
    return unary_op(
        a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& a) {
    return unary_op(
        a, "sqrt", [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        a, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, "sigmoid", [](double x) { return sigmoid_val(x); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
    return unary_op(
        a, "softplus", [](double x) { return softplus_val(x); },
        [](double x, double) { return sigmoid_val(x); });
}

Tensor silu(const Tensor& a) {
    return unary_op(
        a, "silu", [](double x) { return x * sigmoid_val(x); },
        [](double x, double) {
            double s = sigmoid_val(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Tensor gelu(const Tensor& a) {
    return unary_op(
        a, "gelu", [](double x) { return x * norm_cdf(x); },
        [](double x, double) { return norm_cdf(x) + x * norm_pdf(x); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    DenseArray out = dimts::matmul(a.value(), b.value());
    NodePtr na = a.node(), nb = b.node();
    auto fn = [na, nb](const DenseArray& g) {
        if (na->requires_grad) accumulate_grad(*na, dimts::matmul(g, dimts::transpose(nb->value)));
        if (nb->requires_grad) accumulate_grad(*nb, dimts::matmul(dimts::transpose(na->value), g));
    };
    return make_op(std::move(out), {na, nb}, std::move(fn));
}

Tensor matvec(const Tensor& a, const Tensor& v) {
    DenseArray out = dimts::matvec(a.value(), v.value());
    NodePtr na = a.node(), nv = v.node();
    auto fn = [na, nv](const DenseArray& g) {
        if (na->requires_grad) accumulate_grad(*na, dimts::outer(g, nv->value));
        if (nv->requires_grad) accumulate_grad(*nv, dimts::matvec(dimts::transpose(na->value), g));
    };
    return make_op(std::move(out), {na, nv}, std::move(fn));
}

Tensor outer(const Tensor& u, const Tensor& v) {
    DenseArray out = dimts::outer(u.value(), v.value());
    NodePtr nu = u.node(), nv = v.node();
    auto fn = [nu, nv](const DenseArray& g) {
        if (nu->requires_grad) accumulate_grad(*nu, dimts::matvec(g, nv->value));
        if (nv->requires_grad) accumulate_grad(*nv, dimts::matvec(dimts::transpose(g), nu->value));
    };
    return make_op(std::move(out), {nu, nv}, std::move(fn));
}

Tensor transpose(const Tensor& a) {
    DenseArray out = dimts::transpose(a.value());
    NodePtr na = a.node();
    auto fn = [na](const DenseArray& g) {
        if (na->requires_grad) accumulate_grad(*na, dimts::transpose(g));
    };
    return make_op(std::move(out), {na}, std::move(fn));
}

Tensor row(const Tensor& a, std::size_t i) {
    std::size_t m = a.value().rows(), n = a.value().cols();
    if (i >= m) throw numeric_error("row index out of range");
    DenseArray out({n});
    for (std::size_t j = 0; j < n; ++j) out[j] = a.value()[i * n + j];
    NodePtr na = a.node();
    auto fn = [na, i, m, n](const DenseArray& g) {
        if (!na->requires_grad) return;
        DenseArray ga({m, n});
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] = g[j];
        accumulate_grad(*na, ga);
    };
    return make_op(std::move(out), {na}, std::move(fn));
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw numeric_error("stack_rows needs at least one row");
    std::size_t m = rows.size(), n = rows[0].size();
    DenseArray out({m, n});
    std::vector<NodePtr> parents;
    parents.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (rows[i].value().ndim() != 1 || rows[i].size() != n)
            throw numeric_error("stack_rows requires equal-length 1-D rows");
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = rows[i].value()[j];
        parents.push_back(rows[i].node());
    }
    auto ps = parents;
    auto fn = [ps = std::move(ps), n](const DenseArray& g) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (!ps[i]->requires_grad) continue;
            DenseArray gi({n});
            for (std::size_t j = 0; j < n; ++j) gi[j] = g[i * n + j];
            accumulate_grad(*ps[i], gi);
        }
    };
    return make_op(std::move(out), std::move(parents), std::move(fn));
}

Tensor gather_rows(const Tensor& a, std::vector<std::size_t> idx) {
    std::size_t m = a.value().rows(), n = a.value().cols();
    DenseArray out({idx.size(), n});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= m) throw numeric_error("gather_rows index out of range");
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = a.value()[idx[r] * n + j];
    }
    NodePtr na = a.node();
    auto fn = [na, idx = std::move(idx), m, n](const DenseArray& g) {
        if (!na->requires_grad) return;
        DenseArray ga({m, n});
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < n; ++j) ga[idx[r] * n + j] += g[r * n + j];
        accumulate_grad(*na, ga);
    };
    return make_op(std::move(out), {na}, std::move(fn));
}

Tensor reverse_rows(const Tensor& a) {
    std::size_t m = a.value().rows();
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = m - 1 - i;
    return gather_rows(a, std::move(idx));
}

Tensor slice(const Tensor& a, std::size_t start, std::size_t len) {
    if (a.value().ndim() != 1) throw numeric_error("slice expects a 1-D tensor");
    if (start + len > a.size()) throw numeric_error("slice out of range");
    DenseArray out({len});
    for (std::size_t i = 0; i < len; ++i) out[i] = a.value()[start + i];
    NodePtr na = a.node();
    auto fn = [na, start, len](const DenseArray& g) {
        if (!na->requires_grad) return;
        DenseArray ga(na->value.shape());
        for (std::size_t i = 0; i < len; ++i) ga[start + i] = g[i];
        accumulate_grad(*na, ga);
    };
    return make_op(std::move(out), {na}, std::move(fn));
}

Tensor reshape(const Tensor& a, Shape shape) {
    DenseArray out = a.value().reshaped(shape);
    NodePtr na = a.node();
    auto fn = [na](const DenseArray& g) {
        if (na->requires_grad) accumulate_grad(*na, g.reshaped(na->value.shape()));
    };
    return make_op(std::move(out), {na}, std::move(fn));
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.value()[i];
    NodePtr na = a.node();
    auto fn = [na](const DenseArray& g) {
        if (!na->requires_grad) return;
        accumulate_grad(*na, DenseArray(na->value.shape(), g[0]));
    };
    return make_op(DenseArray::scalar(s), {na}, std::move(fn));
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw numeric_error("mean of empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.value()[i];
    double inv = 1.0 / static_cast<double>(a.size());
    NodePtr na = a.node();
    auto fn = [na, inv](const DenseArray& g) {
        if (!na->requires_grad) return;
        accumulate_grad(*na, DenseArray(na->value.shape(), g[0] * inv));
    };
    return make_op(DenseArray::scalar(s * inv), {na}, std::move(fn));
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
    std::size_t m = a.value().rows(), n = a.value().cols();
    DenseArray out({m, n});
    DenseArray inv_std({m});
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = a.value().data() + i * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += x[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= static_cast<double>(n);
        double s = 1.0 / std::sqrt(var + eps);
        inv_std[i] = s;
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (x[j] - mu) * s;
    }
    NodePtr na = a.node();
    DenseArray yv = out;
    auto fn = [na, yv = std::move(yv), inv_std = std::move(inv_std), m, n](const DenseArray& g) {
        if (!na->requires_grad) return;
        DenseArray ga({m, n});
        for (std::size_t i = 0; i < m; ++i) {
            const double* gi = g.data() + i * n;
            const double* yi = yv.data() + i * n;
            double gmean = 0.0, gymean = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                gmean += gi[j];
                gymean += gi[j] * yi[j];
            }
            gmean /= static_cast<double>(n);
            gymean /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j)
                ga[i * n + j] = inv_std[i] * (gi[j] - gmean - yi[j] * gymean);
        }
        accumulate_grad(*na, ga);
    };
    return make_op(std::move(out), {na}, std::move(fn));
}

Tensor dft(const Tensor& a) {
    if (a.value().ndim() != 1) throw numeric_error("dft expects a 1-D tensor");
    std::size_t n = a.size();
    ComplexArray F = dft_forward(a.value());
    DenseArray out({2, n});
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = F.re[i];
        out[n + i] = F.im[i];
    }
    NodePtr na = a.node();
    // The DFT matrices C and S are symmetric, so the adjoint reuses the
    // forward transform: da = C g_re + S g_im.
    auto fn = [na, n](const DenseArray& g) {
        if (!na->requires_grad) return;
        DenseArray gre({n}), gim({n});
        for (std::size_t i = 0; i < n; ++i) {
            gre[i] = g[i];
            gim[i] = g[n + i];
        }
        ComplexArray Fr = dft_forward(gre);
        ComplexArray Fi = dft_forward(gim);
        DenseArray ga({n});
        for (std::size_t i = 0; i < n; ++i) ga[i] = Fr.re[i] + Fi.im[i];
        accumulate_grad(*na, ga);
    };
    return make_op(std::move(out), {na}, std::move(fn));
}

void backward(const Tensor& root) {
    if (!root.defined()) throw numeric_error("backward on undefined tensor");
    if (root.size() != 1) throw numeric_error("backward requires a scalar root");
    NodePtr r = root.node();
    if (!r->requires_grad) return;

    std::vector<NodePtr> order;
    std::unordered_set<Node*> seen;
    std::vector<NodePtr> stack{r};
    seen.insert(r.get());
    while (!stack.empty()) {
        NodePtr n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
        }
    }
    std::sort(order.begin(), order.end(),
              [](const NodePtr& a, const NodePtr& b) { return a->id > b->id; });

    accumulate_grad(*r, DenseArray(r->value.shape(), 1.0));
    for (const auto& n : order) {
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(n->grad);
    }
}

}  // namespace dimts::ad
