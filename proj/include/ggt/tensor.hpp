#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ggt/errors.hpp"

namespace ggt {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

// Product of extents. Throws DimensionError on an empty shape or a zero extent.
std::size_t checked_numel(const Shape& shape);

/// Dense row-major tensor. Every extent is >= 1 and data.size() == product(shape).
///
/// T is double on verification paths and float on the fast forward path.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T(0));
    BasicTensor(Shape shape, std::vector<T> data);

    static BasicTensor from_rows(std::initializer_list<std::initializer_list<T>> rows);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // 2-D access for rank-2 tensors.
    T& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }

    BasicTensor reshaped(Shape shape) const;

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    bool operator==(const BasicTensor& other) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

template <typename T>
BasicTensor<T> zeros_like(const BasicTensor<T>& t) {
    return BasicTensor<T>(t.shape());
}

template <typename T>
BasicTensor<T> identity(std::size_t n) {
    BasicTensor<T> out({n, n});
    for (std::size_t i = 0; i < n; ++i) out.at(i, i) = T(1);
    return out;
}

// Uniform entries in [-scale, scale).
template <typename T>
BasicTensor<T> random_uniform(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
    BasicTensor<T> out(shape);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& v : out.data()) v = static_cast<T>(dist(rng));
    return out;
}

// Largest |a - b|; shapes must match.
template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

// Bitwise equality of the payload (distinguishes -0.0 and NaN payloads).
template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b);

} // namespace ggt
