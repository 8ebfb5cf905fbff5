#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gnmr/common.hpp"

namespace gnmr::nd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

// Dense row-major f64 tensor. Values are treated as immutable once they
// enter a Tape; mutation happens only on parameter storage between steps.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
        : shape_(std::move(shape)),
          data_(shape_numel(shape_), fill),
          requires_grad_(requires_grad) {
        check_shape();
    }

    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
        : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
        check_shape();
        if (data_.size() != shape_numel(shape_))
            throw shape_error("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_str(shape_));
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return Tensor({1, 1}, std::vector<double>{v}, requires_grad);
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : (shape_.empty() ? 0 : 1); }
    std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : (shape_.empty() ? 0 : shape_.back()); }

    bool is_matrix() const { return shape_.size() == 2; }
    bool is_scalar() const { return data_.size() == 1; }

    bool requires_grad() const { return requires_grad_; }
    Tensor& set_requires_grad(bool b) {
        requires_grad_ = b;
        return *this;
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double scalar_value() const {
        if (!is_scalar()) throw shape_error("expected scalar, got " + shape_str(shape_));
        return data_[0];
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    void check_shape() const {
        for (std::size_t e : shape_)
            if (e == 0) throw shape_error("zero extent in shape " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
};

inline void ensure_finite(const Tensor& t, const char* op) {
    if (!t.all_finite())
        throw numeric_error(std::string(op) + " produced a non-finite value");
}

// Row-major matrix helpers used by op kernels.
inline Tensor matrix(std::size_t r, std::size_t c, double fill = 0.0) {
    return Tensor({r, c}, fill);
}

inline Tensor row_vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({1, n}, std::move(v));
}

}  // namespace gnmr::nd
