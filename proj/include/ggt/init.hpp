#pragma once

#include <random>

#include "ggt/tensor.hpp"

namespace ggt {

// Normal(0, std) resampled until within +/- 2 std. Values are rounded to float
// so a model built in either precision holds identical weights and survives a
// GGT1 round trip bit-exactly.
template <typename T>
BasicTensor<T> trunc_normal(const Shape& shape, std::mt19937_64& rng, double std = 0.02) {
    BasicTensor<T> out(shape);
    std::normal_distribution<double> dist(0.0, std);
    for (auto& v : out.data()) {
        double s = dist(rng);
        while (s < -2.0 * std || s > 2.0 * std) s = dist(rng);
        v = static_cast<T>(static_cast<float>(s));
    }
    return out;
}

} // namespace ggt
