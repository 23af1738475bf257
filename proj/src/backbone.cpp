#include "ggt/backbone.hpp"

#include <random>
#include <sstream>

#include "ggt/init.hpp"

namespace ggt {

std::string to_string(ModelVariant v) {
    return v == ModelVariant::gg_t ? "gg-t" : "gg-s";
}

ModelVariant parse_model_variant(const std::string& name) {
    if (name == "gg-t" || name == "gg_t" || name == "GG-T" || name == "ggt") return ModelVariant::gg_t;
    if (name == "gg-s" || name == "gg_s" || name == "GG-S" || name == "ggs") return ModelVariant::gg_s;
    throw ConfigError("unknown model '" + name + "' (expected gg-t or gg-s)");
}

ModelConfig ModelConfig::preset(ModelVariant v) {
    ModelConfig cfg;
    cfg.name = to_string(v);
    cfg.depths = v == ModelVariant::gg_t ? std::array<std::size_t, kStages>{2, 2, 6, 2}
                                         : std::array<std::size_t, kStages>{2, 2, 18, 2};
    cfg.heads = {3, 6, 12, 24};
    return cfg;
}

std::array<StageGeometry, kStages> ModelConfig::stages() const {
    auto input = [&] {
        return "input " + std::to_string(image_h) + "x" + std::to_string(image_w) + ": ";
    };
    if (patch == 0 || m == 0 || embed_dim == 0 || in_channels == 0 || num_classes == 0) {
        throw ConfigError("model: patch, M, embed_dim, in_channels and num_classes must be >= 1");
    }
    if (image_h % patch || image_w % patch) {
        throw ConfigError(input() + "stage 1 grid is not integral (image sides must be multiples of patch size " +
                          std::to_string(patch) + "; with M=" + std::to_string(m) + " valid square sizes are " +
                          "multiples of " + std::to_string(patch * 8 * m) + ")");
    }
    std::array<StageGeometry, kStages> out{};
    std::size_t h = image_h / patch, w = image_w / patch;
    for (std::size_t s = 0; s < kStages; ++s) {
        if (s > 0) {
            if (h % 2 || w % 2) {
                throw ConfigError(input() + "stage " + std::to_string(s) + " grid " + std::to_string(h) + "x" +
                                  std::to_string(w) + " cannot be downsampled 2x into stage " + std::to_string(s + 1));
            }
            h /= 2;
            w /= 2;
        }
        if (h % m || w % m) {
            throw ConfigError(input() + "stage " + std::to_string(s + 1) + " grid " + std::to_string(h) + "x" +
                              std::to_string(w) + " is not divisible by partition size M=" + std::to_string(m));
        }
        const std::size_t c = embed_dim << s;
        if (heads[s] == 0 || c % heads[s]) {
            throw ConfigError("stage " + std::to_string(s + 1) + ": " + std::to_string(c) +
                              " channels not divisible by " + std::to_string(heads[s]) + " heads");
        }
        out[s] = {h, w, c, depths[s], heads[s]};
    }
    return out;
}

BlockConfig ModelConfig::block(std::size_t stage) const {
    const auto geo = stages().at(stage);
    BlockConfig b;
    b.channels = geo.channels;
    b.heads = geo.heads;
    b.mlp_ratio = mlp_ratio;
    b.gaze = gaze;
    b.spec = PartitionSpec(geo.h, geo.w, m);
    b.rel_pos_bias = rel_pos_bias;
    return b;
}

std::string ModelConfig::describe() const {
    std::ostringstream os;
    os << "model=" << name << " image=" << in_channels << "x" << image_h << "x" << image_w << " patch=" << patch
       << " C=" << embed_dim << " depths=(" << depths[0] << "," << depths[1] << "," << depths[2] << "," << depths[3]
       << ") heads=(" << heads[0] << "," << heads[1] << "," << heads[2] << "," << heads[3] << ") M=" << m
       << " mlp_ratio=" << mlp_ratio << " gaze=" << gaze.describe() << " rel_pos_bias=" << (rel_pos_bias ? 1 : 0)
       << " classes=" << num_classes;
    return os.str();
}

template <typename T>
ModelWeights<T> zero_model(const ModelConfig& cfg) {
    const auto geo = cfg.stages();
    ModelWeights<T> w;
    w.config = cfg;
    const std::size_t c = cfg.embed_dim, f = cfg.in_channels * cfg.patch * cfg.patch;
    w.embed.proj_w = Parameter<T>(BasicTensor<T>({f, c}));
    w.embed.proj_b = Parameter<T>(BasicTensor<T>({c}));
    w.embed.norm_gamma = Parameter<T>(BasicTensor<T>({c}, T(1)));
    w.embed.norm_beta = Parameter<T>(BasicTensor<T>({c}));
    for (std::size_t s = 0; s < kStages; ++s) {
        const BlockConfig bc = cfg.block(s);
        for (std::size_t b = 0; b < geo[s].depth; ++b) w.stages[s].blocks.push_back(BlockWeights<T>::zeros(bc));
        if (s + 1 < kStages) {
            const std::size_t cs = geo[s].channels;
            DownsampleWeights<T> ds;
            ds.norm_gamma = Parameter<T>(BasicTensor<T>({4 * cs}, T(1)));
            ds.norm_beta = Parameter<T>(BasicTensor<T>({4 * cs}));
            ds.reduction = Parameter<T>(BasicTensor<T>({4 * cs, 2 * cs}));
            w.stages[s].downsample.push_back(std::move(ds));
        }
    }
    const std::size_t last = geo.back().channels;
    w.norm_gamma = Parameter<T>(BasicTensor<T>({last}, T(1)));
    w.norm_beta = Parameter<T>(BasicTensor<T>({last}));
    w.head_w = Parameter<T>(BasicTensor<T>({last, cfg.num_classes}));
    w.head_b = Parameter<T>(BasicTensor<T>({cfg.num_classes}));
    return w;
}

template <typename T>
ModelWeights<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    ModelWeights<T> w = zero_model<T>(cfg);
    std::mt19937_64 rng(seed);
    w.for_each_parameter([&](const std::string& name, Parameter<T>& p) {
        const bool random = name.ends_with("_w") || name.ends_with(".wq") || name.ends_with(".wk") ||
                            name.ends_with(".wv") || name.ends_with(".wo") || name.ends_with("gaze_kernel") ||
                            name.ends_with(".reduction");
        if (random) p = Parameter<T>(trunc_normal<T>(p.value.shape(), rng));
    });
    return w;
}

template <typename T>
Var<T> patch_embed(const Var<T>& image, const PatchEmbedWeights<T>& w, std::size_t patch) {
    auto& tr = image.trace();
    ScopeGuard<T> scope(tr, "patch_embed");
    Var<T> tokens = linear(patchify(image, patch), tr.param(w.proj_w), tr.param(w.proj_b));
    return layer_norm(tokens, tr.param(w.norm_gamma), tr.param(w.norm_beta));
}

template <typename T>
Var<T> patch_merge(const Var<T>& x, std::size_t h, std::size_t w, const DownsampleWeights<T>& weights) {
    if (h % 2 || w % 2) {
        throw DimensionError("patch_merge: grid " + std::to_string(h) + "x" + std::to_string(w) + " must be even");
    }
    if (x.shape().size() != 2 || x.shape()[0] != h * w) {
        throw DimensionError("patch_merge: tokens " + shape_str(x.shape()) + " do not cover a " + std::to_string(h) +
                             "x" + std::to_string(w) + " grid");
    }
    auto& tr = x.trace();
    const std::size_t oh = h / 2, ow = w / 2;
    std::vector<Var<T>> quads;
    for (auto [dy, dx] : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
        std::vector<std::size_t> rows;
        rows.reserve(oh * ow);
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) rows.push_back((2 * i + dy) * w + 2 * j + dx);
        quads.push_back(gather_rows(x, std::span<const std::size_t>(rows)));
    }
    Var<T> normed = layer_norm(concat_cols(quads), tr.param(weights.norm_gamma), tr.param(weights.norm_beta));
    return linear(normed, tr.param(weights.reduction));
}

template <typename T>
Var<T> forward(const Var<T>& image, const ModelWeights<T>& weights, std::vector<Shape>* stage_shapes) {
    const ModelConfig& cfg = weights.config;
    const auto geo = cfg.stages();
    const Shape expected{cfg.in_channels, cfg.image_h, cfg.image_w};
    if (image.shape() != expected) {
        throw ConfigError("forward: image " + shape_str(image.shape()) + " does not match model input " +
                          shape_str(expected));
    }
    auto& tr = image.trace();
    Var<T> x = patch_embed(image, weights.embed, cfg.patch);
    for (std::size_t s = 0; s < kStages; ++s) {
        ScopeGuard<T> stage(tr, "stage" + std::to_string(s + 1));
        const BlockConfig bc = cfg.block(s);
        for (std::size_t b = 0; b < weights.stages[s].blocks.size(); ++b) {
            ScopeGuard<T> block(tr, "block" + std::to_string(b));
            x = gg_block(x, weights.stages[s].blocks[b], bc);
        }
        if (stage_shapes) stage_shapes->push_back(x.shape());
        if (!weights.stages[s].downsample.empty()) {
            ScopeGuard<T> ds(tr, "downsample");
            x = patch_merge(x, geo[s].h, geo[s].w, weights.stages[s].downsample.front());
        }
    }
    {
        ScopeGuard<T> scope(tr, "norm");
        x = layer_norm(x, tr.param(weights.norm_gamma), tr.param(weights.norm_beta));
    }
    ScopeGuard<T> scope(tr, "head");
    Var<T> logits = linear(mean_rows(x), tr.param(weights.head_w), tr.param(weights.head_b));
    return reshape(logits, {cfg.num_classes});
}

template <typename T>
BasicTensor<T> infer(const ModelWeights<T>& weights, const BasicTensor<T>& image) {
    Trace<T> trace(GradMode::off);
    return forward(trace.constant(image), weights).value();
}

#define GGT_INSTANTIATE_BACKBONE(T)                                                                   \
    template ModelWeights<T> zero_model(const ModelConfig&);                                          \
    template ModelWeights<T> build_model(const ModelConfig&, std::uint64_t);                          \
    template Var<T> patch_embed(const Var<T>&, const PatchEmbedWeights<T>&, std::size_t);             \
    template Var<T> patch_merge(const Var<T>&, std::size_t, std::size_t, const DownsampleWeights<T>&); \
    template Var<T> forward(const Var<T>&, const ModelWeights<T>&, std::vector<Shape>*);              \
    template BasicTensor<T> infer(const ModelWeights<T>&, const BasicTensor<T>&);

GGT_INSTANTIATE_BACKBONE(double)
GGT_INSTANTIATE_BACKBONE(float)

} // namespace ggt
