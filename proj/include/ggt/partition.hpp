#pragma once

#include <cstddef>
#include <vector>

#include "ggt/autograd.hpp"
#include "ggt/tensor.hpp"

namespace ggt {

/// Geometry of a partitioned h x w token grid with partitions of M x M tokens.
///
/// Requires h and w divisible by M. For the dilated split the sampling stride
/// (dilation) is (h / M, w / M); there are (h / M) * (w / M) partitions.
class PartitionSpec {
public:
    PartitionSpec(std::size_t h, std::size_t w, std::size_t m);

    std::size_t h() const { return h_; }
    std::size_t w() const { return w_; }
    std::size_t m() const { return m_; }
    std::size_t tokens() const { return h_ * w_; }
    std::size_t dilation_h() const { return h_ / m_; }
    std::size_t dilation_w() const { return w_ / m_; }
    std::size_t partitions() const { return dilation_h() * dilation_w(); }
    std::size_t partition_size() const { return m_ * m_; }

    bool operator==(const PartitionSpec&) const = default;

private:
    std::size_t h_, w_, m_;
};

/// A bijection on [0, N). Split order position k holds token forward[k];
/// inverse[forward[k]] == k.
struct Permutation {
    std::vector<std::size_t> forward;
    std::vector<std::size_t> inverse;

    static Permutation from_forward(std::vector<std::size_t> forward);
    static Permutation identity(std::size_t n);

    std::size_t size() const { return forward.size(); }
    bool is_bijection() const;
};

// Partition (i, j) in row-major order; inside it, grid token
// (i + p * h/M, j + q * w/M) sits at offset (p, q), row-major.
Permutation dilated_split_permutation(const PartitionSpec& spec);

// Contiguous M x M windows in row-major order.
Permutation window_split_permutation(const PartitionSpec& spec);

// Reorders rows into split order: out row k = tokens row forward[k].
template <typename T>
BasicTensor<T> split(const BasicTensor<T>& tokens, const Permutation& perm);

// Inverse of split: out row i = tokens row inverse[i].
template <typename T>
BasicTensor<T> merge(const BasicTensor<T>& tokens, const Permutation& perm);

template <typename T>
Var<T> split(const Var<T>& tokens, const Permutation& perm);

template <typename T>
Var<T> merge(const Var<T>& tokens, const Permutation& perm);

} // namespace ggt
