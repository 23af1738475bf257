#include "ggt/ggblock.hpp"

#include <cmath>

#include "ggt/init.hpp"

namespace ggt {

std::size_t adaptive_kernel_size(std::size_t dilation) {
    if (dilation == 0) throw ConfigError("adaptive gaze: dilation must be >= 1");
    return dilation % 2 == 0 ? dilation + 1 : dilation + 2;
}

std::pair<std::size_t, std::size_t> GazeConfig::kernel(const PartitionSpec& spec) const {
    if (policy == Policy::fixed) {
        if (fixed_kernel == 0 || fixed_kernel % 2 == 0) {
            throw ConfigError("fixed gaze kernel must be odd and >= 1, got " + std::to_string(fixed_kernel));
        }
        return {fixed_kernel, fixed_kernel};
    }
    return {adaptive_kernel_size(spec.dilation_h()), adaptive_kernel_size(spec.dilation_w())};
}

std::string GazeConfig::describe() const {
    return policy == Policy::fixed ? "fixed-" + std::to_string(fixed_kernel) : "adaptive";
}

std::size_t BlockConfig::hidden() const {
    const double h = mlp_ratio * static_cast<double>(channels);
    const auto rounded = static_cast<std::size_t>(std::llround(h));
    if (mlp_ratio <= 0.0 || rounded == 0 || std::abs(h - static_cast<double>(rounded)) > 1e-9) {
        throw ConfigError("block: MLP hidden width ratio*C must be a positive integer");
    }
    return rounded;
}

AttentionConfig BlockConfig::attention() const {
    AttentionConfig a;
    a.channels = channels;
    a.heads = heads;
    a.m = spec.m();
    a.variant = AttentionVariant::g_msa;
    a.rel_pos_bias = rel_pos_bias;
    return a;
}

void BlockConfig::validate() const {
    attention().validate();
    hidden();
    gaze.kernel(spec);
}

template <typename T>
BlockWeights<T> BlockWeights<T>::zeros(const BlockConfig& cfg) {
    cfg.validate();
    const std::size_t c = cfg.channels, hid = cfg.hidden();
    const auto [kh, kw] = cfg.gaze.kernel(cfg.spec);
    BlockWeights w;
    w.norm1_gamma = Parameter<T>(BasicTensor<T>({c}, T(1)));
    w.norm1_beta = Parameter<T>(BasicTensor<T>({c}));
    w.attn = AttentionWeights<T>::zeros(cfg.attention());
    w.gaze_kernel = Parameter<T>(BasicTensor<T>({c, kh, kw}));
    w.norm2_gamma = Parameter<T>(BasicTensor<T>({c}, T(1)));
    w.norm2_beta = Parameter<T>(BasicTensor<T>({c}));
    w.fc1_w = Parameter<T>(BasicTensor<T>({c, hid}));
    w.fc1_b = Parameter<T>(BasicTensor<T>({hid}));
    w.fc2_w = Parameter<T>(BasicTensor<T>({hid, c}));
    w.fc2_b = Parameter<T>(BasicTensor<T>({c}));
    return w;
}

template <typename T>
BlockWeights<T> BlockWeights<T>::init(const BlockConfig& cfg, std::mt19937_64& rng) {
    auto w = zeros(cfg);
    w.attn = AttentionWeights<T>::init(cfg.attention(), rng);
    w.gaze_kernel.value = trunc_normal<T>(w.gaze_kernel.value.shape(), rng);
    w.fc1_w.value = trunc_normal<T>(w.fc1_w.value.shape(), rng);
    w.fc2_w.value = trunc_normal<T>(w.fc2_w.value.shape(), rng);
    return w;
}

template <typename T>
Var<T> gaze(const Var<T>& v_merged, const Var<T>& kernel, const PartitionSpec& spec) {
    const auto& s = v_merged.shape();
    if (s.size() != 2 || s[0] != spec.tokens()) {
        throw DimensionError("gaze: tokens " + shape_str(s) + " do not cover a " + std::to_string(spec.h()) + "x" +
                             std::to_string(spec.w()) + " grid");
    }
    const std::size_t c = s[1];
    Var<T> grid = reshape(transpose(v_merged), {c, spec.h(), spec.w()});
    Var<T> conv = depthwise_conv2d(grid, kernel);
    return transpose(reshape(conv, {c, spec.tokens()}));
}

template <typename T>
Var<T> gg_msa(const Var<T>& x, const BlockWeights<T>& w, const BlockConfig& cfg) {
    cfg.validate();
    auto& tr = x.trace();
    const auto glance = partitioned_attention(x, w.attn, cfg.attention(), dilated_split_permutation(cfg.spec),
                                              cfg.spec.partition_size());
    Var<T> local;
    {
        ScopeGuard<T> scope(tr, "gaze");
        local = gaze(glance.merged_values, tr.param(w.gaze_kernel), cfg.spec);
    }
    ScopeGuard<T> scope(tr, "proj");
    return linear(add(glance.attended, local), tr.param(w.attn.wo), tr.param(w.attn.bo));
}

template <typename T>
Var<T> gg_block(const Var<T>& x, const BlockWeights<T>& w, const BlockConfig& cfg) {
    auto& tr = x.trace();
    Var<T> normed;
    {
        ScopeGuard<T> scope(tr, "norm1");
        normed = layer_norm(x, tr.param(w.norm1_gamma), tr.param(w.norm1_beta));
    }
    Var<T> z;
    {
        ScopeGuard<T> scope(tr, "attn");
        z = add(gg_msa(normed, w, cfg), x);
    }
    {
        ScopeGuard<T> scope(tr, "norm2");
        normed = layer_norm(z, tr.param(w.norm2_gamma), tr.param(w.norm2_beta));
    }
    ScopeGuard<T> scope(tr, "mlp");
    Var<T> hidden = gelu(linear(normed, tr.param(w.fc1_w), tr.param(w.fc1_b)));
    return add(linear(hidden, tr.param(w.fc2_w), tr.param(w.fc2_b)), z);
}

#define GGT_INSTANTIATE_BLOCK(T)                                                                  \
    template struct BlockWeights<T>;                                                              \
    template Var<T> gaze(const Var<T>&, const Var<T>&, const PartitionSpec&);                     \
    template Var<T> gg_msa(const Var<T>&, const BlockWeights<T>&, const BlockConfig&);            \
    template Var<T> gg_block(const Var<T>&, const BlockWeights<T>&, const BlockConfig&);

GGT_INSTANTIATE_BLOCK(double)
GGT_INSTANTIATE_BLOCK(float)

} // namespace ggt
