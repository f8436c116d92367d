#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace zsmt {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

/// Raised when an operation receives operands whose shapes do not conform.
class ShapeError : public std::invalid_argument {
   public:
    ShapeError(std::string op, const std::string& detail)
        : std::invalid_argument(op + ": " + detail), op_(std::move(op)) {}

    const std::string& op() const noexcept { return op_; }

   private:
    std::string op_;
};

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
};

}  // namespace detail

/// Dense row-major float64 tensor. Copies share storage; use clone() for a deep copy.
class Tensor {
   public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
        : impl_(std::make_shared<detail::TensorImpl>()) {
        if (numel(shape) != values.size()) {
            throw ShapeError("tensor", "shape " + to_string(shape) + " holds " +
                                           std::to_string(numel(shape)) + " values, got " +
                                           std::to_string(values.size()));
        }
        impl_->shape = std::move(shape);
        impl_->values = std::move(values);
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor filled(Shape shape, double value) {
        const auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, value));
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return Tensor({}, {value}, requires_grad);
    }

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t size() const { return impl_->values.size(); }
    bool requires_grad() const { return impl_ && impl_->requires_grad; }

    std::span<const double> values() const { return impl_->values; }

    /// In-place access for parameter initialisation and optimizer updates only.
    std::span<double> mutable_values() { return impl_->values; }

    double item() const {
        if (size() != 1) throw ShapeError("item", "tensor of shape " + to_string(shape()) + " is not a scalar");
        return impl_->values[0];
    }

    double operator[](std::size_t i) const { return impl_->values[i]; }

    Tensor clone() const { return Tensor(impl_->shape, impl_->values, impl_->requires_grad); }

    const detail::TensorImpl* id() const noexcept { return impl_.get(); }
    const std::shared_ptr<detail::TensorImpl>& impl() const noexcept { return impl_; }

   private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace zsmt
