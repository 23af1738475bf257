#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>

#include "ggt/attention.hpp"
#include "ggt/partition.hpp"

namespace ggt {

/// Kernel-size policy of the gaze branch.
///
/// Fixed(k) uses a k x k kernel everywhere. Adaptive picks, per axis, the
/// smallest odd size >= dilation + 1, i.e. (9, 5, 3, 3) for the dilations
/// (8, 4, 2, 1) of a 224 x 224 input with M = 7.
struct GazeConfig {
    enum class Policy { fixed, adaptive };

    Policy policy = Policy::adaptive;
    std::size_t fixed_kernel = 3;

    static GazeConfig fixed(std::size_t k) { return {Policy::fixed, k}; }
    static GazeConfig adaptive() { return {Policy::adaptive, 3}; }

    // (kh, kw) for a block whose partition geometry is `spec`.
    std::pair<std::size_t, std::size_t> kernel(const PartitionSpec& spec) const;
    std::string describe() const;
};

std::size_t adaptive_kernel_size(std::size_t dilation);

struct BlockConfig {
    std::size_t channels = 0;
    std::size_t heads = 1;
    double mlp_ratio = 4.0;
    GazeConfig gaze;
    PartitionSpec spec{1, 1, 1};
    bool rel_pos_bias = true;

    std::size_t hidden() const;
    AttentionConfig attention() const;
    void validate() const;
};

template <typename T>
struct BlockWeights {
    Parameter<T> norm1_gamma, norm1_beta;
    AttentionWeights<T> attn;
    Parameter<T> gaze_kernel; // C x kh x kw, no bias
    Parameter<T> norm2_gamma, norm2_beta;
    Parameter<T> fc1_w, fc1_b; // C x hidden, hidden
    Parameter<T> fc2_w, fc2_b; // hidden x C, C

    // Zero weights, LN gamma = 1.
    static BlockWeights zeros(const BlockConfig& cfg);
    // Truncated-normal linears and gaze kernel, zero biases, unit LN.
    static BlockWeights init(const BlockConfig& cfg, std::mt19937_64& rng);
};

// Depthwise convolution of N x C tokens laid out on the spec's h x w grid.
template <typename T>
Var<T> gaze(const Var<T>& v_merged, const Var<T>& kernel, const PartitionSpec& spec);

// Wo . (glance output merged to token order + gaze(Merging(V))) + bo.
template <typename T>
Var<T> gg_msa(const Var<T>& x, const BlockWeights<T>& w, const BlockConfig& cfg);

// z' = gg_msa(LN(x)) + x; out = MLP(LN(z')) + z'.
template <typename T>
Var<T> gg_block(const Var<T>& x, const BlockWeights<T>& w, const BlockConfig& cfg);

} // namespace ggt
