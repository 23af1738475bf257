#pragma once

#include <cstddef>
#include <vector>

#include "ggt/ggblock.hpp"

// Straight-line reference implementations used to cross-check the library.
// They share no code with the attention / partition / block paths: tokens are
// gathered by explicit grid coordinates, every product is a plain loop.
namespace ggt::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

Mat to_mat(const Tensor& t);
Tensor from_mat(const Mat& m);

struct Attn {
    Mat wq, wk, wv, wo;
    Vec bq, bk, bv, bo;
    Mat table; // (2M-1)^2 x heads, empty when off
    std::size_t heads = 1;
    std::size_t m = 1;
};

Attn from_weights(const AttentionWeights<double>& w, const AttentionConfig& cfg);

// Multi-head attention of `x` with no output projection. `coords` (optional)
// give each token's (p, q) inside an M x M partition for the bias lookup.
// Every materialized attention row sum is appended to `row_sums` if given.
Mat attend(const Mat& x, const Attn& a, const std::vector<std::pair<long, long>>* coords,
           Vec* row_sums = nullptr);

Mat project(const Mat& x, const Attn& a);

Mat msa(const Mat& x, const Attn& a, Vec* row_sums = nullptr);
// Pre-projection per-partition outputs scattered back to grid order.
Mat glance(const Mat& x, const Attn& a, std::size_t h, std::size_t w, Vec* row_sums = nullptr);
Mat g_msa(const Mat& x, const Attn& a, std::size_t h, std::size_t w, Vec* row_sums = nullptr);
Mat w_msa(const Mat& x, const Attn& a, std::size_t h, std::size_t w, Vec* row_sums = nullptr);
Mat sra(const Mat& x, const Attn& a, std::size_t h, std::size_t w, std::size_t r);

// Depthwise same-padded cross-correlation of token features on an h x w grid;
// kernel is C x kh x kw flattened.
Mat conv_tokens(const Mat& x, const Vec& kernel, std::size_t kh, std::size_t kw, std::size_t h, std::size_t w);

Mat gg_msa(const Mat& x, const BlockWeights<double>& bw, const BlockConfig& cfg);
Mat gg_block(const Mat& x, const BlockWeights<double>& bw, const BlockConfig& cfg);

} // namespace ggt::oracle
