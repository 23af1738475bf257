#include "ggt/partition.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace ggt {

PartitionSpec::PartitionSpec(std::size_t h, std::size_t w, std::size_t m) : h_(h), w_(w), m_(m) {
    if (m == 0 || h == 0 || w == 0) {
        throw PartitionError("partition: h, w and M must be >= 1 (got h=" + std::to_string(h) +
                             ", w=" + std::to_string(w) + ", M=" + std::to_string(m) + ")");
    }
    if (h % m || w % m) {
        throw PartitionError("partition: grid " + std::to_string(h) + "x" + std::to_string(w) +
                             " is not divisible by partition size M=" + std::to_string(m));
    }
}

Permutation Permutation::from_forward(std::vector<std::size_t> forward) {
    Permutation p;
    p.inverse.assign(forward.size(), forward.size());
    for (std::size_t k = 0; k < forward.size(); ++k) {
        if (forward[k] >= forward.size() || p.inverse[forward[k]] != forward.size()) {
            throw DimensionError("permutation: forward array is not a bijection");
        }
        p.inverse[forward[k]] = k;
    }
    p.forward = std::move(forward);
    return p;
}

Permutation Permutation::identity(std::size_t n) {
    std::vector<std::size_t> fwd(n);
    std::iota(fwd.begin(), fwd.end(), std::size_t{0});
    return from_forward(std::move(fwd));
}

bool Permutation::is_bijection() const {
    if (forward.size() != inverse.size()) return false;
    std::vector<std::size_t> sorted = forward;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != i) return false;
    for (std::size_t k = 0; k < forward.size(); ++k)
        if (inverse[forward[k]] != k) return false;
    return true;
}

Permutation dilated_split_permutation(const PartitionSpec& spec) {
    const std::size_t m = spec.m(), dh = spec.dilation_h(), dw = spec.dilation_w(), w = spec.w();
    std::vector<std::size_t> fwd;
    fwd.reserve(spec.tokens());
    for (std::size_t i = 0; i < dh; ++i)
        for (std::size_t j = 0; j < dw; ++j)
            for (std::size_t p = 0; p < m; ++p)
                for (std::size_t q = 0; q < m; ++q) fwd.push_back((i + p * dh) * w + (j + q * dw));
    return Permutation::from_forward(std::move(fwd));
}

Permutation window_split_permutation(const PartitionSpec& spec) {
    const std::size_t m = spec.m(), nh = spec.h() / m, nw = spec.w() / m, w = spec.w();
    std::vector<std::size_t> fwd;
    fwd.reserve(spec.tokens());
    for (std::size_t bi = 0; bi < nh; ++bi)
        for (std::size_t bj = 0; bj < nw; ++bj)
            for (std::size_t p = 0; p < m; ++p)
                for (std::size_t q = 0; q < m; ++q) fwd.push_back((bi * m + p) * w + (bj * m + q));
    return Permutation::from_forward(std::move(fwd));
}

namespace {

template <typename T>
BasicTensor<T> reorder_rows(const BasicTensor<T>& tokens, const std::vector<std::size_t>& index, const char* op) {
    if (tokens.rank() != 2 || tokens.rows() != index.size()) {
        throw DimensionError(std::string(op) + ": tokens " + shape_str(tokens.shape()) + " vs permutation of size " +
                             std::to_string(index.size()));
    }
    const std::size_t c = tokens.cols();
    BasicTensor<T> out(tokens.shape());
    for (std::size_t i = 0; i < index.size(); ++i)
        std::copy_n(tokens.data().data() + index[i] * c, c, out.data().data() + i * c);
    return out;
}

template <typename T>
void check_var_rows(const Var<T>& tokens, std::size_t n, const char* op) {
    if (tokens.shape().size() != 2 || tokens.shape()[0] != n) {
        throw DimensionError(std::string(op) + ": tokens " + shape_str(tokens.shape()) + " vs permutation of size " +
                             std::to_string(n));
    }
}

} // namespace

template <typename T>
BasicTensor<T> split(const BasicTensor<T>& tokens, const Permutation& perm) {
    return reorder_rows(tokens, perm.forward, "split");
}

template <typename T>
BasicTensor<T> merge(const BasicTensor<T>& tokens, const Permutation& perm) {
    return reorder_rows(tokens, perm.inverse, "merge");
}

template <typename T>
Var<T> split(const Var<T>& tokens, const Permutation& perm) {
    check_var_rows(tokens, perm.size(), "split");
    return gather_rows(tokens, std::span<const std::size_t>(perm.forward));
}

template <typename T>
Var<T> merge(const Var<T>& tokens, const Permutation& perm) {
    check_var_rows(tokens, perm.size(), "merge");
    return gather_rows(tokens, std::span<const std::size_t>(perm.inverse));
}

template Tensor split(const Tensor&, const Permutation&);
template TensorF split(const TensorF&, const Permutation&);
template Tensor merge(const Tensor&, const Permutation&);
template TensorF merge(const TensorF&, const Permutation&);
template Var<double> split(const Var<double>&, const Permutation&);
template Var<float> split(const Var<float>&, const Permutation&);
template Var<double> merge(const Var<double>&, const Permutation&);
template Var<float> merge(const Var<float>&, const Permutation&);

} // namespace ggt
