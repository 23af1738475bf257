#include "ggt/attention.hpp"

#include <cmath>

#include "ggt/init.hpp"

namespace ggt {

std::string to_string(AttentionVariant v) {
    switch (v) {
    case AttentionVariant::msa: return "msa";
    case AttentionVariant::g_msa: return "gmsa";
    case AttentionVariant::w_msa: return "wmsa";
    case AttentionVariant::sra: return "sra";
    }
    return "?";
}

AttentionVariant parse_attention_variant(const std::string& name) {
    if (name == "msa") return AttentionVariant::msa;
    if (name == "gmsa" || name == "g_msa" || name == "g-msa") return AttentionVariant::g_msa;
    if (name == "wmsa" || name == "w_msa" || name == "w-msa") return AttentionVariant::w_msa;
    if (name == "sra") return AttentionVariant::sra;
    throw ConfigError("unknown attention variant '" + name + "' (expected msa, gmsa, wmsa or sra)");
}

void AttentionConfig::validate() const {
    if (channels == 0 || heads == 0) throw ConfigError("attention: channels and heads must be >= 1");
    if (channels % heads) {
        throw ConfigError("attention: channels " + std::to_string(channels) + " not divisible by heads " +
                          std::to_string(heads));
    }
    if (m == 0) throw ConfigError("attention: partition size M must be >= 1");
    if (reduction == 0) throw ConfigError("attention: reduction R must be >= 1");
}

template <typename T>
AttentionWeights<T> AttentionWeights<T>::zeros(const AttentionConfig& cfg) {
    cfg.validate();
    const std::size_t c = cfg.channels;
    AttentionWeights w;
    for (auto* p : {&w.wq, &w.wk, &w.wv, &w.wo}) *p = Parameter<T>(BasicTensor<T>({c, c}));
    for (auto* p : {&w.bq, &w.bk, &w.bv, &w.bo}) *p = Parameter<T>(BasicTensor<T>({c}));
    w.has_rel_bias = cfg.rel_pos_bias;
    if (cfg.rel_pos_bias) {
        const std::size_t side = 2 * cfg.m - 1;
        w.rel_bias = Parameter<T>(BasicTensor<T>({side * side, cfg.heads}));
    }
    return w;
}

template <typename T>
AttentionWeights<T> AttentionWeights<T>::init(const AttentionConfig& cfg, std::mt19937_64& rng) {
    auto w = zeros(cfg);
    const std::size_t c = cfg.channels;
    for (auto* p : {&w.wq, &w.wk, &w.wv, &w.wo}) p->value = trunc_normal<T>({c, c}, rng);
    return w;
}

std::vector<std::size_t> relative_bias_index(std::size_t m, std::size_t heads, std::size_t head) {
    const std::size_t n = m * m, side = 2 * m - 1;
    std::vector<std::size_t> index(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t dy = i / m + (m - 1) - j / m;
            const std::size_t dx = i % m + (m - 1) - j % m;
            index[i * n + j] = (dy * side + dx) * heads + head;
        }
    }
    return index;
}

namespace {

template <typename T>
struct Projections {
    Var<T> q, k, v;
};

// Multi-head attention of one chunk of queries against one chunk of keys/values.
template <typename T>
Var<T> attend_chunk(const Var<T>& q, const Var<T>& k, const Var<T>& v, std::size_t heads,
                    const std::vector<Var<T>>& bias) {
    const std::size_t d = q.shape()[1] / heads;
    const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
    std::vector<Var<T>> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Var<T> qh = heads == 1 ? q : slice_cols(q, h * d, d);
        Var<T> kh = heads == 1 ? k : slice_cols(k, h * d, d);
        Var<T> vh = heads == 1 ? v : slice_cols(v, h * d, d);
        Var<T> scores = scale(matmul(qh, transpose(kh)), inv_sqrt_d);
        if (!bias.empty()) scores = add(scores, bias[h]);
        outs.push_back(matmul(softmax_rows(scores), vh));
    }
    return heads == 1 ? outs.front() : concat_cols(outs);
}

template <typename T>
void check_tokens(const Var<T>& x, std::size_t n, const AttentionConfig& cfg, const char* op) {
    cfg.validate();
    if (x.shape().size() != 2 || x.shape()[1] != cfg.channels || (n && x.shape()[0] != n)) {
        throw DimensionError(std::string(op) + ": tokens " + shape_str(x.shape()) + " incompatible with C=" +
                             std::to_string(cfg.channels) + (n ? ", N=" + std::to_string(n) : std::string()));
    }
}

template <typename T>
Var<T> output_projection(const Var<T>& attended, const AttentionWeights<T>& w) {
    auto& tr = attended.trace();
    ScopeGuard<T> scope(tr, "proj");
    return linear(attended, tr.param(w.wo), tr.param(w.bo));
}

template <typename T>
Var<T> bind(Trace<T>& tr, const Parameter<T>& p) {
    return tr.param(p);
}

} // namespace

template <typename T>
GlanceResult<T> partitioned_attention(const Var<T>& x, const AttentionWeights<T>& w, const AttentionConfig& cfg,
                                      const Permutation& perm, std::size_t partition_size) {
    check_tokens(x, perm.size(), cfg, "partitioned_attention");
    if (partition_size == 0 || perm.size() % partition_size) {
        throw PartitionError("partitioned_attention: " + std::to_string(perm.size()) +
                             " tokens not divisible into partitions of " + std::to_string(partition_size));
    }
    const bool use_bias = cfg.rel_pos_bias && w.has_rel_bias;
    if (use_bias && partition_size != cfg.m * cfg.m) {
        throw ConfigError("partitioned_attention: relative position bias needs partitions of M^2 tokens");
    }
    auto& tr = x.trace();
    Projections<T> proj;
    {
        ScopeGuard<T> scope(tr, "proj");
        proj.q = linear(x, bind(tr, w.wq), bind(tr, w.bq));
        proj.k = linear(x, bind(tr, w.wk), bind(tr, w.bk));
        proj.v = linear(x, bind(tr, w.wv), bind(tr, w.bv));
    }

    ScopeGuard<T> scope(tr, "attend");
    std::vector<Var<T>> bias;
    if (use_bias) {
        Var<T> table = bind(tr, w.rel_bias);
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            const auto index = relative_bias_index(cfg.m, cfg.heads, h);
            bias.push_back(gather(table, std::span<const std::size_t>(index), {partition_size, partition_size}));
        }
    }

    const Var<T> qs = split(proj.q, perm);
    const Var<T> ks = split(proj.k, perm);
    const Var<T> vs = split(proj.v, perm);
    const std::size_t count = perm.size() / partition_size;
    Var<T> attended_split;
    if (count == 1) {
        attended_split = attend_chunk(qs, ks, vs, cfg.heads, bias);
    } else {
        std::vector<Var<T>> parts;
        parts.reserve(count);
        for (std::size_t p = 0; p < count; ++p) {
            const std::size_t begin = p * partition_size;
            parts.push_back(attend_chunk(slice_rows(qs, begin, partition_size), slice_rows(ks, begin, partition_size),
                                         slice_rows(vs, begin, partition_size), cfg.heads, bias));
        }
        attended_split = concat_rows(parts);
    }
    return {merge(attended_split, perm), merge(vs, perm)};
}

template <typename T>
Var<T> msa(const Var<T>& x, const AttentionWeights<T>& w, const AttentionConfig& cfg) {
    check_tokens(x, 0, cfg, "msa");
    const std::size_t n = x.shape()[0];
    AttentionConfig full = cfg;
    full.rel_pos_bias = false;
    auto glance = partitioned_attention(x, w, full, Permutation::identity(n), n);
    return output_projection(glance.attended, w);
}

template <typename T>
Var<T> g_msa(const Var<T>& x, const AttentionWeights<T>& w, const PartitionSpec& spec, const AttentionConfig& cfg) {
    if (spec.m() != cfg.m) throw ConfigError("g_msa: partition spec M differs from attention config M");
    auto glance = partitioned_attention(x, w, cfg, dilated_split_permutation(spec), spec.partition_size());
    return output_projection(glance.attended, w);
}

template <typename T>
Var<T> w_msa(const Var<T>& x, const AttentionWeights<T>& w, const PartitionSpec& spec, const AttentionConfig& cfg) {
    if (spec.m() != cfg.m) throw ConfigError("w_msa: partition spec M differs from attention config M");
    auto local = partitioned_attention(x, w, cfg, window_split_permutation(spec), spec.partition_size());
    return output_projection(local.attended, w);
}

template <typename T>
Var<T> sra(const Var<T>& x, const AttentionWeights<T>& w, std::size_t h, std::size_t wd, const AttentionConfig& cfg) {
    check_tokens(x, h * wd, cfg, "sra");
    const std::size_t r = cfg.reduction;
    if (h % r || wd % r) {
        throw ConfigError("sra: grid " + std::to_string(h) + "x" + std::to_string(wd) +
                          " not divisible by reduction R=" + std::to_string(r));
    }
    auto& tr = x.trace();
    Var<T> q, k, v;
    {
        ScopeGuard<T> scope(tr, "proj");
        q = linear(x, bind(tr, w.wq), bind(tr, w.bq));
        Var<T> pooled = r == 1 ? x : avg_pool_grid(x, h, wd, r);
        k = linear(pooled, bind(tr, w.wk), bind(tr, w.bk));
        v = linear(pooled, bind(tr, w.wv), bind(tr, w.bv));
    }
    Var<T> attended;
    {
        ScopeGuard<T> scope(tr, "attend");
        attended = attend_chunk(q, k, v, cfg.heads, {});
    }
    return output_projection(attended, w);
}

template <typename T>
Var<T> attention(const Var<T>& x, const AttentionWeights<T>& w, std::size_t h, std::size_t wd,
                 const AttentionConfig& cfg) {
    switch (cfg.variant) {
    case AttentionVariant::msa: return msa(x, w, cfg);
    case AttentionVariant::g_msa: return g_msa(x, w, PartitionSpec(h, wd, cfg.m), cfg);
    case AttentionVariant::w_msa: return w_msa(x, w, PartitionSpec(h, wd, cfg.m), cfg);
    case AttentionVariant::sra: return sra(x, w, h, wd, cfg);
    }
    throw ConfigError("attention: unknown variant");
}

#define GGT_INSTANTIATE_ATTENTION(T)                                                                        \
    template struct AttentionWeights<T>;                                                                    \
    template GlanceResult<T> partitioned_attention(const Var<T>&, const AttentionWeights<T>&,               \
                                                   const AttentionConfig&, const Permutation&, std::size_t); \
    template Var<T> msa(const Var<T>&, const AttentionWeights<T>&, const AttentionConfig&);                 \
    template Var<T> g_msa(const Var<T>&, const AttentionWeights<T>&, const PartitionSpec&,                  \
                          const AttentionConfig&);                                                          \
    template Var<T> w_msa(const Var<T>&, const AttentionWeights<T>&, const PartitionSpec&,                  \
                          const AttentionConfig&);                                                          \
    template Var<T> sra(const Var<T>&, const AttentionWeights<T>&, std::size_t, std::size_t,                \
                        const AttentionConfig&);                                                            \
    template Var<T> attention(const Var<T>&, const AttentionWeights<T>&, std::size_t, std::size_t,          \
                              const AttentionConfig&);

GGT_INSTANTIATE_ATTENTION(double)
GGT_INSTANTIATE_ATTENTION(float)

} // namespace ggt
