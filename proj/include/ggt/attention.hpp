#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "ggt/autograd.hpp"
#include "ggt/partition.hpp"

namespace ggt {

enum class AttentionVariant { msa, g_msa, w_msa, sra };

std::string to_string(AttentionVariant v);
AttentionVariant parse_attention_variant(const std::string& name);

struct AttentionConfig {
    std::size_t channels = 0;
    std::size_t heads = 1;
    std::size_t m = 1;         // partition side (G-MSA / W-MSA)
    std::size_t reduction = 1; // pooling factor (SRA)
    AttentionVariant variant = AttentionVariant::msa;
    bool rel_pos_bias = false;

    std::size_t head_dim() const { return channels / heads; }
    // Throws ConfigError unless channels % heads == 0 and m, reduction >= 1.
    void validate() const;
};

/// Projection weights are stored Cin x Cout (x . W). The relative position
/// bias table has (2M-1)^2 rows (one per intra-partition offset) and one column
/// per head; it is only present when rel_pos_bias is on.
template <typename T>
struct AttentionWeights {
    Parameter<T> wq, wk, wv, wo;
    Parameter<T> bq, bk, bv, bo;
    Parameter<T> rel_bias;
    bool has_rel_bias = false;

    static AttentionWeights zeros(const AttentionConfig& cfg);
    // Truncated normal (std 0.02) projections; zero biases and bias table.
    static AttentionWeights init(const AttentionConfig& cfg, std::mt19937_64& rng);
};

template <typename T>
struct GlanceResult {
    Var<T> attended;      // per-partition attention output, merged to token order (pre-projection)
    Var<T> merged_values; // Merging(V): value projections in token order
};

// Per-partition multi-head attention over the partitions defined by `perm`
// (consecutive runs of `partition_size` rows in split order), merged back.
// Relative position bias, when enabled, treats each partition as an M x M grid.
template <typename T>
GlanceResult<T> partitioned_attention(const Var<T>& x, const AttentionWeights<T>& w, const AttentionConfig& cfg,
                                      const Permutation& perm, std::size_t partition_size);

// Full multi-head self-attention: per head softmax(Q K^T / sqrt(C/heads)) V, then Wo.
template <typename T>
Var<T> msa(const Var<T>& x, const AttentionWeights<T>& w, const AttentionConfig& cfg);

// Glance attention: MSA inside each adaptively-dilated partition, merged back.
template <typename T>
Var<T> g_msa(const Var<T>& x, const AttentionWeights<T>& w, const PartitionSpec& spec, const AttentionConfig& cfg);

// Local-window attention baseline.
template <typename T>
Var<T> w_msa(const Var<T>& x, const AttentionWeights<T>& w, const PartitionSpec& spec, const AttentionConfig& cfg);

// Spatial-reduction baseline: keys/values from the r x r average-pooled grid.
template <typename T>
Var<T> sra(const Var<T>& x, const AttentionWeights<T>& w, std::size_t h, std::size_t wd, const AttentionConfig& cfg);

// Dispatches on cfg.variant for an h x wd token grid.
template <typename T>
Var<T> attention(const Var<T>& x, const AttentionWeights<T>& w, std::size_t h, std::size_t wd,
                 const AttentionConfig& cfg);

// Flat gather indices into the ((2M-1)^2 x heads) bias table for one head:
// entry [i * M^2 + j] is the bias of query offset i against key offset j.
std::vector<std::size_t> relative_bias_index(std::size_t m, std::size_t heads, std::size_t head);

} // namespace ggt
