#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ggt/ggblock.hpp"

namespace ggt {

enum class ModelVariant { gg_t, gg_s };

std::string to_string(ModelVariant v);
ModelVariant parse_model_variant(const std::string& name);

inline constexpr std::size_t kStages = 4;

struct StageGeometry {
    std::size_t h = 0, w = 0;
    std::size_t channels = 0;
    std::size_t depth = 0;
    std::size_t heads = 0;
};

/// Hierarchical GG-Transformer configuration. Depths, heads, patch merging and
/// the classification head follow the Swin reference design: GG-T uses depths
/// (2, 2, 6, 2), GG-S (2, 2, 18, 2), both with heads (3, 6, 12, 24), C = 96,
/// M = 7, MLP ratio 4 and patch size 4. Stage s has C * 2^s channels.
struct ModelConfig {
    std::string name = "custom";
    std::size_t in_channels = 3;
    std::size_t patch = 4;
    std::size_t embed_dim = 96;
    std::array<std::size_t, kStages> depths{2, 2, 6, 2};
    std::array<std::size_t, kStages> heads{3, 6, 12, 24};
    std::size_t m = 7;
    double mlp_ratio = 4.0;
    GazeConfig gaze = GazeConfig::adaptive();
    bool rel_pos_bias = true;
    std::size_t num_classes = 1000;
    std::size_t image_h = 224, image_w = 224;

    static ModelConfig preset(ModelVariant v);

    // Throws ConfigError naming the first stage whose grid is invalid.
    std::array<StageGeometry, kStages> stages() const;
    BlockConfig block(std::size_t stage) const;
    void validate() const { stages(); }
    std::string describe() const;
};

template <typename T>
struct PatchEmbedWeights {
    Parameter<T> proj_w, proj_b; // (in_channels * P * P) x C, C
    Parameter<T> norm_gamma, norm_beta;
};

template <typename T>
struct DownsampleWeights {
    Parameter<T> norm_gamma, norm_beta; // 4C
    Parameter<T> reduction;             // 4C x 2C, no bias
};

template <typename T>
struct StageWeights {
    std::vector<BlockWeights<T>> blocks;
    std::vector<DownsampleWeights<T>> downsample; // empty for the last stage, else one entry
};

template <typename T>
struct ModelWeights {
    ModelConfig config;
    PatchEmbedWeights<T> embed;
    std::array<StageWeights<T>, kStages> stages;
    Parameter<T> norm_gamma, norm_beta;
    Parameter<T> head_w, head_b; // 8C x classes, classes

    // Visits every parameter in a fixed order with a dotted name.
    template <typename F>
    void for_each_parameter(F&& f) const;
    template <typename F>
    void for_each_parameter(F&& f);

    std::uint64_t parameter_count() const;

    template <typename U>
    ModelWeights<U> cast() const;
};

// Zero biases, unit LN, zero weights.
template <typename T>
ModelWeights<T> zero_model(const ModelConfig& cfg);

// Truncated normal (std 0.02) linears, conv kernels and head; zero biases and
// bias tables; unit LN. Deterministic in (cfg, seed).
template <typename T>
ModelWeights<T> build_model(const ModelConfig& cfg, std::uint64_t seed);

inline ModelWeights<double> build(ModelVariant v, std::uint64_t seed) {
    return build_model<double>(ModelConfig::preset(v), seed);
}

// P x P patches projected to C channels, then LN. Image is in_channels x H x W.
template <typename T>
Var<T> patch_embed(const Var<T>& image, const PatchEmbedWeights<T>& w, std::size_t patch);

// Concatenate each 2 x 2 neighbourhood of an h x w grid (order (0,0), (1,0),
// (0,1), (1,1)), LN, then reduce 4C -> 2C.
template <typename T>
Var<T> patch_merge(const Var<T>& x, std::size_t h, std::size_t w, const DownsampleWeights<T>& weights);

// Image -> logits [num_classes]. `stage_shapes`, when given, receives the token
// shape at the end of each stage (before downsampling).
template <typename T>
Var<T> forward(const Var<T>& image, const ModelWeights<T>& weights, std::vector<Shape>* stage_shapes = nullptr);

// Runs a gradient-free forward pass.
template <typename T>
BasicTensor<T> infer(const ModelWeights<T>& weights, const BasicTensor<T>& image);

// ---- implementation of the templates above ---------------------------------

namespace detail {

template <typename W, typename F>
void visit_attention(W& a, const std::string& prefix, F& f) {
    f(prefix + ".wq", a.wq);
    f(prefix + ".bq", a.bq);
    f(prefix + ".wk", a.wk);
    f(prefix + ".bk", a.bk);
    f(prefix + ".wv", a.wv);
    f(prefix + ".bv", a.bv);
    f(prefix + ".wo", a.wo);
    f(prefix + ".bo", a.bo);
    if (a.has_rel_bias) f(prefix + ".rel_bias", a.rel_bias);
}

template <typename M, typename F>
void visit_model(M& m, F& f) {
    f(std::string("patch_embed.proj_w"), m.embed.proj_w);
    f(std::string("patch_embed.proj_b"), m.embed.proj_b);
    f(std::string("patch_embed.norm_gamma"), m.embed.norm_gamma);
    f(std::string("patch_embed.norm_beta"), m.embed.norm_beta);
    for (std::size_t s = 0; s < kStages; ++s) {
        const std::string stage = "stage" + std::to_string(s + 1);
        for (std::size_t b = 0; b < m.stages[s].blocks.size(); ++b) {
            auto& blk = m.stages[s].blocks[b];
            const std::string p = stage + ".block" + std::to_string(b);
            f(p + ".norm1_gamma", blk.norm1_gamma);
            f(p + ".norm1_beta", blk.norm1_beta);
            visit_attention(blk.attn, p + ".attn", f);
            f(p + ".gaze_kernel", blk.gaze_kernel);
            f(p + ".norm2_gamma", blk.norm2_gamma);
            f(p + ".norm2_beta", blk.norm2_beta);
            f(p + ".fc1_w", blk.fc1_w);
            f(p + ".fc1_b", blk.fc1_b);
            f(p + ".fc2_w", blk.fc2_w);
            f(p + ".fc2_b", blk.fc2_b);
        }
        for (auto& ds : m.stages[s].downsample) {
            f(stage + ".downsample.norm_gamma", ds.norm_gamma);
            f(stage + ".downsample.norm_beta", ds.norm_beta);
            f(stage + ".downsample.reduction", ds.reduction);
        }
    }
    f(std::string("norm_gamma"), m.norm_gamma);
    f(std::string("norm_beta"), m.norm_beta);
    f(std::string("head_w"), m.head_w);
    f(std::string("head_b"), m.head_b);
}

} // namespace detail

template <typename T>
template <typename F>
void ModelWeights<T>::for_each_parameter(F&& f) const {
    detail::visit_model(*this, f);
}

template <typename T>
template <typename F>
void ModelWeights<T>::for_each_parameter(F&& f) {
    detail::visit_model(*this, f);
}

template <typename T>
std::uint64_t ModelWeights<T>::parameter_count() const {
    std::uint64_t n = 0;
    for_each_parameter([&](const std::string&, const Parameter<T>& p) { n += p.numel(); });
    return n;
}

template <typename T>
template <typename U>
ModelWeights<U> ModelWeights<T>::cast() const {
    ModelWeights<U> out = zero_model<U>(config);
    std::vector<const Parameter<T>*> src;
    for_each_parameter([&](const std::string&, const Parameter<T>& p) { src.push_back(&p); });
    std::size_t i = 0;
    out.for_each_parameter([&](const std::string&, Parameter<U>& p) {
        p = Parameter<U>(src[i++]->value.template cast<U>());
    });
    return out;
}

} // namespace ggt
