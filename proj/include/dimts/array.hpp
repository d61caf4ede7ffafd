#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace dimts {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Row-major dense array of float64 values. The workhorse storage type for
/// model inputs, latent states, parameters and metric buffers.
class DenseArray {
public:
    DenseArray() = default;
    explicit DenseArray(Shape shape);                           // zero-filled
    DenseArray(Shape shape, std::vector<double> data);
    DenseArray(Shape shape, double fill);

    static DenseArray scalar(double v) { return DenseArray({1}, {v}); }
    static DenseArray zeros(Shape shape) { return DenseArray(std::move(shape)); }
    static DenseArray full(Shape shape, double v) { return DenseArray(std::move(shape), v); }
    static DenseArray from_vector(std::vector<double> v);       // shape [n]
    static DenseArray identity(std::size_t n);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t ndim() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const;   // first dim of a 2-D array
    std::size_t cols() const;   // second dim of a 2-D array

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& vec() noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c);                   // 2-D access
    double at(std::size_t r, std::size_t c) const;

    bool same_shape(const DenseArray& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(double v);
    DenseArray reshaped(Shape new_shape) const;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Split complex storage; `re` and `im` always share a shape.
struct ComplexArray {
    DenseArray re;
    DenseArray im;

    ComplexArray() = default;
    ComplexArray(DenseArray real, DenseArray imag);
    std::size_t size() const { return re.size(); }
};

// Plain (non-differentiable) helpers used by oracles, solvers and metrics.
DenseArray matmul(const DenseArray& a, const DenseArray& b);
DenseArray transpose(const DenseArray& a);
DenseArray matvec(const DenseArray& a, const DenseArray& v);
DenseArray outer(const DenseArray& u, const DenseArray& v);
double max_abs_diff(const DenseArray& a, const DenseArray& b);
double max_abs(const DenseArray& a);

}  // namespace dimts
