#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dimts/array.hpp"

namespace dimts::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the computation graph. `backward_fn` receives the upstream
/// gradient (shaped like `value`) and accumulates into the parents' grads.
struct Node {
    std::uint64_t id = 0;
    DenseArray value;
    DenseArray grad;  // lazily allocated on first accumulation
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(const DenseArray&)> backward_fn;
};

void accumulate_grad(Node& n, const DenseArray& g);

/// Lightweight handle; copying shares the underlying node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor constant(DenseArray v);
    static Tensor leaf(DenseArray v);  // requires_grad parameter node
    static Tensor scalar(double v) { return constant(DenseArray::scalar(v)); }

    bool defined() const noexcept { return node_ != nullptr; }
    const NodePtr& node() const noexcept { return node_; }
    const DenseArray& value() const { return node_->value; }
    DenseArray& mutable_value() { return node_->value; }
    const DenseArray& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t size() const { return node_->value.size(); }
    double item() const;  // scalar value, errors otherwise
    void zero_grad();

private:
    NodePtr node_;
};

/// While alive on a thread, newly built ops are constant-folded (no graph).
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

// Elementwise; the smaller operand broadcasts when its shape is a trailing
// suffix of the larger one (or it is a single scalar).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor affine(const Tensor& a, double k, double c);  // k*a + c
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form

Tensor matmul(const Tensor& a, const Tensor& b);   // [m,k]x[k,n]
Tensor matvec(const Tensor& a, const Tensor& v);   // [m,n]x[n] -> [m]
Tensor outer(const Tensor& u, const Tensor& v);    // [m],[n] -> [m,n]
Tensor transpose(const Tensor& a);

Tensor row(const Tensor& a, std::size_t i);                       // [m,n] -> [n]
Tensor stack_rows(const std::vector<Tensor>& rows);               // m x [n] -> [m,n]
Tensor gather_rows(const Tensor& a, std::vector<std::size_t> idx);
Tensor reverse_rows(const Tensor& a);
Tensor slice(const Tensor& a, std::size_t start, std::size_t len);  // 1-D
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);   // -> scalar [1]
Tensor mean(const Tensor& a);  // -> scalar [1]

/// Per-row normalization without learned affine: (x - mu) / sqrt(var + eps).
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-5);

/// Unnormalized DFT of a length-n vector; output [2,n] = (re; im) rows.
Tensor dft(const Tensor& a);

/// Reverse pass from a scalar root; every reachable grad-requiring node ends
/// up holding d(root)/d(node). Visits nodes exactly once in reverse creation
/// order, which is a valid reverse topological order.
void backward(const Tensor& root);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace dimts::ad
