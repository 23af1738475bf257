#include "ggt/complexity.hpp"

#include <iomanip>
#include <sstream>

namespace ggt {

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out;
    if (__builtin_add_overflow(a, b, &out)) {
        throw ArithmeticError("u64 overflow in " + std::to_string(a) + " + " + std::to_string(b));
    }
    return out;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out;
    if (__builtin_mul_overflow(a, b, &out)) {
        throw ArithmeticError("u64 overflow in " + std::to_string(a) + " * " + std::to_string(b));
    }
    return out;
}

std::uint64_t checked_mul(std::initializer_list<std::uint64_t> factors) {
    std::uint64_t out = 1;
    for (auto f : factors) out = checked_mul(out, f);
    return out;
}

namespace {

void require_positive(std::initializer_list<std::uint64_t> v, const char* what) {
    for (auto x : v) {
        if (x == 0) throw ConfigError(std::string(what) + ": arguments must be >= 1");
    }
}

} // namespace

std::uint64_t omega_msa(std::uint64_t n, std::uint64_t c) {
    require_positive({n, c}, "omega_msa");
    return checked_add(checked_mul({4, n, c, c}), checked_mul({2, n, n, c}));
}

std::uint64_t omega_g_msa(std::uint64_t n, std::uint64_t c, std::uint64_t m) {
    require_positive({n, c, m}, "omega_g_msa");
    return checked_add(checked_mul({4, n, c, c}), checked_mul({2, m, m, n, c}));
}

std::uint64_t omega_gg_msa(std::uint64_t n, std::uint64_t c, std::uint64_t m, std::uint64_t k) {
    return omega_gg_msa(n, c, m, k, k);
}

std::uint64_t omega_gg_msa(std::uint64_t n, std::uint64_t c, std::uint64_t m, std::uint64_t kh, std::uint64_t kw) {
    return checked_add(omega_g_msa(n, c, m), checked_mul({kh, kw, n, c}));
}

std::uint64_t omega_sra(std::uint64_t n, std::uint64_t c, std::uint64_t r) {
    require_positive({n, c, r}, "omega_sra");
    const std::uint64_t r2 = checked_mul(r, r);
    if (n % r2) throw ConfigError("omega_sra: N=" + std::to_string(n) + " not divisible by R^2=" + std::to_string(r2));
    const std::uint64_t nk = n / r2;
    return checked_add(checked_add(checked_mul({2, n, c, c}), checked_mul({2, nk, c, c})),
                       checked_mul({2, n, nk, c}));
}

std::uint64_t omega_attention(const AttentionConfig& cfg, std::uint64_t h, std::uint64_t w) {
    cfg.validate();
    const std::uint64_t n = checked_mul(h, w);
    switch (cfg.variant) {
    case AttentionVariant::msa: return omega_msa(n, cfg.channels);
    case AttentionVariant::g_msa:
    case AttentionVariant::w_msa:
        PartitionSpec(h, w, cfg.m);
        return omega_g_msa(n, cfg.channels, cfg.m);
    case AttentionVariant::sra:
        if (h % cfg.reduction || w % cfg.reduction) {
            throw ConfigError("sra: grid " + std::to_string(h) + "x" + std::to_string(w) +
                              " not divisible by reduction R=" + std::to_string(cfg.reduction));
        }
        return omega_sra(n, cfg.channels, cfg.reduction);
    }
    throw ConfigError("omega_attention: unknown variant");
}

// ---- FlopsReport -----------------------------------------------------------

void FlopsReport::add(const std::string& name, std::uint64_t macs, std::uint64_t params, std::uint64_t elementwise) {
    for (auto& e : entries) {
        if (e.name == name) {
            e.macs = checked_add(e.macs, macs);
            e.params = checked_add(e.params, params);
            e.elementwise = checked_add(e.elementwise, elementwise);
            return;
        }
    }
    entries.push_back({name, macs, params, elementwise});
}

LayerCost FlopsReport::total() const {
    LayerCost t{"total"};
    for (const auto& e : entries) {
        t.macs = checked_add(t.macs, e.macs);
        t.params = checked_add(t.params, e.params);
        t.elementwise = checked_add(t.elementwise, e.elementwise);
    }
    return t;
}

LayerCost FlopsReport::sum_suffix(const std::string& suffix) const {
    LayerCost t{"*" + suffix};
    for (const auto& e : entries) {
        if (!e.name.ends_with(suffix)) continue;
        t.macs = checked_add(t.macs, e.macs);
        t.params = checked_add(t.params, e.params);
        t.elementwise = checked_add(t.elementwise, e.elementwise);
    }
    return t;
}

const LayerCost* FlopsReport::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::string FlopsReport::to_csv() const {
    std::ostringstream os;
    os << "layer,macs,params\n";
    for (const auto& e : entries) os << e.name << ',' << e.macs << ',' << e.params << '\n';
    const auto t = total();
    os << "total," << t.macs << ',' << t.params << '\n';
    return os.str();
}

std::string FlopsReport::to_table() const {
    std::size_t width = 5;
    for (const auto& e : entries) width = std::max(width, e.name.size());
    std::ostringstream os;
    auto row = [&](const LayerCost& e) {
        os << std::left << std::setw(static_cast<int>(width)) << e.name << std::right << "  " << std::setw(14)
           << e.macs << "  " << std::setw(12) << e.params << "  " << std::setw(12) << e.elementwise << '\n';
    };
    os << std::left << std::setw(static_cast<int>(width)) << "layer" << std::right << "  " << std::setw(14) << "macs"
       << "  " << std::setw(12) << "params" << "  " << std::setw(12) << "elementwise" << '\n';
    for (const auto& e : entries) row(e);
    os << std::string(width + 44, '-') << '\n';
    const auto t = total();
    row(t);
    std::ostringstream summary;
    summary << std::fixed << std::setprecision(3) << "params " << t.params / 1e6 << " M, MACs " << t.macs / 1e9
            << " G\n";
    os << summary.str() << "convention: " << convention << '\n';
    return os.str();
}

FlopsReport FlopsReport::from_csv(const std::string& text) {
    FlopsReport r;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "layer,macs,params") throw FormatError("flops csv: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        const auto a = line.find(','), b = line.rfind(',');
        if (a == std::string::npos || a == b) throw FormatError("flops csv: malformed row '" + line + "'");
        const std::string name = line.substr(0, a);
        if (name == "total") continue;
        try {
            std::size_t used = 0;
            const std::string macs = line.substr(a + 1, b - a - 1), params = line.substr(b + 1);
            const auto m = std::stoull(macs, &used);
            if (used != macs.size()) throw std::invalid_argument(macs);
            const auto p = std::stoull(params, &used);
            if (used != params.size()) throw std::invalid_argument(params);
            r.entries.push_back({name, m, p, 0});
        } catch (const std::logic_error&) {
            throw FormatError("flops csv: bad integer in row '" + line + "'");
        }
    }
    if (!header) throw FormatError("flops csv: missing header");
    return r;
}

// ---- symbolic model walk ----------------------------------------------------

void count_block(FlopsReport& report, const std::string& prefix, const BlockConfig& cfg) {
    cfg.validate();
    const std::uint64_t n = cfg.spec.tokens(), c = cfg.channels, m = cfg.spec.m(), heads = cfg.heads;
    const std::uint64_t hid = cfg.hidden();
    const auto [kh, kw] = cfg.gaze.kernel(cfg.spec);
    const std::uint64_t side = 2 * m - 1;
    const std::uint64_t nc = checked_mul(n, c);

    report.add(prefix + ".norm1", 0, 2 * c, nc);
    report.add(prefix + ".attn.proj", checked_mul({4, n, c, c}), checked_add(checked_mul({4, c, c}), 4 * c));
    report.add(prefix + ".attn.attend", checked_mul({2, m, m, n, c}),
               cfg.rel_pos_bias ? checked_mul({side, side, heads}) : 0, checked_mul({heads, n, m, m}));
    report.add(prefix + ".attn.gaze", checked_mul({kh, kw, n, c}), checked_mul({c, kh, kw}));
    report.add(prefix + ".norm2", 0, 2 * c, nc);
    report.add(prefix + ".mlp", checked_mul({2, n, c, hid}), checked_add(checked_mul({2, c, hid}), hid + c),
               checked_mul(n, hid));
}

FlopsReport count_model(const ModelConfig& cfg) {
    const auto geo = cfg.stages();
    FlopsReport r;
    const std::uint64_t c0 = cfg.embed_dim, f = checked_mul({cfg.in_channels, cfg.patch, cfg.patch});
    const std::uint64_t n0 = checked_mul(geo[0].h, geo[0].w);
    r.add("patch_embed", checked_mul({n0, f, c0}), checked_add(checked_mul(f, c0), 3 * c0), checked_mul(n0, c0));
    for (std::size_t s = 0; s < kStages; ++s) {
        const std::string stage = "stage" + std::to_string(s + 1);
        const BlockConfig bc = cfg.block(s);
        for (std::size_t b = 0; b < geo[s].depth; ++b) count_block(r, stage + ".block" + std::to_string(b), bc);
        if (s + 1 < kStages) {
            const std::uint64_t c = geo[s].channels;
            const std::uint64_t n_out = checked_mul(geo[s].h / 2, geo[s].w / 2);
            r.add(stage + ".downsample", checked_mul({n_out, 4 * c, 2 * c}), checked_add(8 * c, checked_mul(8 * c, c)),
                  checked_mul(n_out, 4 * c));
        }
    }
    const std::uint64_t cl = geo.back().channels, nl = checked_mul(geo.back().h, geo.back().w);
    r.add("norm", 0, 2 * cl, checked_mul(nl, cl));
    r.add("head", checked_mul(cl, cfg.num_classes), checked_add(checked_mul(cl, cfg.num_classes), cfg.num_classes));
    return r;
}

template <typename T>
FlopsReport count_executed(const Trace<T>& trace) {
    FlopsReport r;
    // Walk ops and params together so entries appear in first-touch order.
    for (const auto& p : trace.parameters()) r.add(p.scope, 0, p.numel);
    FlopsReport ops;
    for (const auto& rec : trace.records()) {
        if (rec.macs || rec.elementwise) ops.add(rec.scope, rec.macs, 0, rec.elementwise);
    }
    // Merge keeping op order first, then parameter-only scopes.
    FlopsReport out;
    for (const auto& e : ops.entries) {
        const LayerCost* p = r.find(e.name);
        out.add(e.name, e.macs, p ? p->params : 0, e.elementwise);
    }
    for (const auto& e : r.entries) {
        if (!out.find(e.name)) out.add(e.name, 0, e.params);
    }
    return out;
}

template FlopsReport count_executed(const Trace<double>&);
template FlopsReport count_executed(const Trace<float>&);

} // namespace ggt
