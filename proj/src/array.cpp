#include "dimts/array.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dimts/errors.hpp"

namespace dimts {

namespace {
std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}
}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << "]";
    return os.str();
}

DenseArray::DenseArray(Shape shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

DenseArray::DenseArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
        throw numeric_error("array shape " + shape_str(shape_) + " does not match buffer of " +
                            std::to_string(data_.size()) + " values");
    }
}

DenseArray::DenseArray(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

DenseArray DenseArray::from_vector(std::vector<double> v) {
    std::size_t n = v.size();
    return DenseArray({n}, std::move(v));
}

DenseArray DenseArray::identity(std::size_t n) {
    DenseArray out({n, n});
    for (std::size_t i = 0; i < n; ++i) out.data_[i * n + i] = 1.0;
    return out;
}

std::size_t DenseArray::rows() const {
    if (shape_.size() != 2) throw numeric_error("rows() requires a 2-D array, got " + shape_str(shape_));
    return shape_[0];
}

std::size_t DenseArray::cols() const {
    if (shape_.size() != 2) throw numeric_error("cols() requires a 2-D array, got " + shape_str(shape_));
    return shape_[1];
}

double& DenseArray::at(std::size_t r, std::size_t c) {
    return data_[r * cols() + c];
}

double DenseArray::at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
}

bool DenseArray::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void DenseArray::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

DenseArray DenseArray::reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != data_.size()) {
        throw numeric_error("cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
    }
    return DenseArray(std::move(new_shape), data_);
}

ComplexArray::ComplexArray(DenseArray real, DenseArray imag)
    : re(std::move(real)), im(std::move(imag)) {
    if (!re.same_shape(im)) throw numeric_error("complex array parts must share a shape");
}

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
    std::size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) {
        throw numeric_error("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    DenseArray out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b.data() + p * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

DenseArray transpose(const DenseArray& a) {
    std::size_t m = a.rows(), n = a.cols();
    DenseArray out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    return out;
}

DenseArray matvec(const DenseArray& a, const DenseArray& v) {
    std::size_t m = a.rows(), n = a.cols();
    if (v.ndim() != 1 || v.size() != n) {
        throw numeric_error("matvec shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(v.shape()));
    }
    DenseArray out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* arow = a.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += arow[j] * v[j];
        out[i] = acc;
    }
    return out;
}

DenseArray outer(const DenseArray& u, const DenseArray& v) {
    if (u.ndim() != 1 || v.ndim() != 1) throw numeric_error("outer expects two 1-D arrays");
    std::size_t m = u.size(), n = v.size();
    DenseArray out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = u[i] * v[j];
    return out;
}

double max_abs_diff(const DenseArray& a, const DenseArray& b) {
    if (!a.same_shape(b)) {
        throw numeric_error("max_abs_diff shape mismatch: " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs(const DenseArray& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

}  // namespace dimts
