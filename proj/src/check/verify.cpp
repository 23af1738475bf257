#include "ggt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "ggt/backbone.hpp"
#include "ggt/complexity.hpp"
#include "ggt/oracle.hpp"

namespace ggt {

namespace {

using oracle::Mat;

double max_diff(const Tensor& a, const Mat& b) { return max_abs_diff(a, oracle::from_mat(b)); }

CheckResult check(const std::string& suite, const std::string& name, bool ok, double metric, std::string detail) {
    return {suite, name, ok, metric, std::move(detail)};
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

template <typename T>
void randomize(AttentionWeights<T>& w, std::mt19937_64& rng, double scale = 0.5) {
    for (auto* p : {&w.wq, &w.wk, &w.wv, &w.wo, &w.bq, &w.bk, &w.bv, &w.bo}) {
        *p = Parameter<T>(random_uniform<T>(p->value.shape(), rng, scale));
    }
    if (w.has_rel_bias) w.rel_bias = Parameter<T>(random_uniform<T>(w.rel_bias.value.shape(), rng, scale));
}

std::vector<Parameter<double>*> block_params(BlockWeights<double>& w) {
    return {&w.norm1_gamma, &w.norm1_beta, &w.attn.wq, &w.attn.bq, &w.attn.wk, &w.attn.bk, &w.attn.wv,
            &w.attn.bv, &w.attn.wo, &w.attn.bo, &w.attn.rel_bias, &w.gaze_kernel, &w.norm2_gamma, &w.norm2_beta,
            &w.fc1_w, &w.fc1_b, &w.fc2_w, &w.fc2_b};
}

BlockWeights<double> random_block(const BlockConfig& cfg, std::mt19937_64& rng) {
    auto w = BlockWeights<double>::zeros(cfg);
    for (auto* p : block_params(w)) {
        if (p->value.empty()) continue;
        *p = Parameter<double>(random_uniform<double>(p->value.shape(), rng, 0.5));
    }
    return w;
}

// G-MSA as exercised by the oracle suite; the fault variant corrupts the merge.
Tensor glance_under_test(const Tensor& x, const AttentionWeights<double>& w, const PartitionSpec& spec,
                         const AttentionConfig& cfg, Fault fault) {
    Trace<double> tr(GradMode::off);
    const Var<double> xv = tr.constant(x);
    if (fault == Fault::none) return g_msa(xv, w, spec, cfg).value();
    Permutation perm = dilated_split_permutation(spec);
    if (perm.size() >= 2) std::swap(perm.inverse[0], perm.inverse[perm.size() - 1]);
    auto glance = partitioned_attention(xv, w, cfg, perm, spec.partition_size());
    return linear(glance.attended, tr.param(w.wo), tr.param(w.bo)).value();
}

Tensor run(const std::function<Var<double>(Trace<double>&, const Var<double>&)>& f, const Tensor& x) {
    Trace<double> tr(GradMode::off);
    return f(tr, tr.constant(x)).value();
}

// ---- oracle ------------------------------------------------------------------

std::vector<CheckResult> oracle_suite(const VerifyOptions& opts) {
    const std::string s = "oracle";
    std::vector<CheckResult> out;
    std::mt19937_64 rng(opts.seed ^ 0x6f7261636c65ULL);

    {   // small full MSA against the three-loop oracle
        double worst = 0, row_err = 0;
        for (std::size_t heads : {1, 2}) {
            AttentionConfig cfg{4, heads, 1, 1, AttentionVariant::msa, false};
            auto w = AttentionWeights<double>::zeros(cfg);
            randomize(w, rng);
            const Tensor x = random_uniform<double>({6, 4}, rng);
            oracle::Vec sums;
            const Mat ref = oracle::msa(oracle::to_mat(x), oracle::from_weights(w, cfg), &sums);
            worst = std::max(worst, max_diff(run([&](auto&, auto& v) { return msa(v, w, cfg); }, x), ref));
            for (double r : sums) row_err = std::max(row_err, std::abs(r - 1.0));
        }
        out.push_back(check(s, "msa_n6_c4", worst <= 1e-9, worst, "tol=1e-9"));
        out.push_back(check(s, "oracle_rows_stochastic", row_err <= 1e-6, row_err, "tol=1e-6"));
    }

    {   // exhaustive G-MSA grid sweep
        double worst = 0, row_err = 0;
        std::size_t cases = 0;
        for (std::size_t h = 1; h <= 8; ++h) {
            for (std::size_t wd = 1; wd <= 8; ++wd) {
                for (std::size_t m : {1, 2, 4}) {
                    if (h % m || wd % m) continue;
                    for (std::size_t heads : {1, 2}) {
                        AttentionConfig cfg{4, heads, m, 1, AttentionVariant::g_msa, false};
                        auto w = AttentionWeights<double>::zeros(cfg);
                        randomize(w, rng);
                        const Tensor x = random_uniform<double>({h * wd, 4}, rng);
                        const PartitionSpec spec(h, wd, m);
                        oracle::Vec sums;
                        const Mat ref = oracle::g_msa(oracle::to_mat(x), oracle::from_weights(w, cfg), h, wd, &sums);
                        worst = std::max(worst, max_diff(glance_under_test(x, w, spec, cfg, opts.fault), ref));
                        for (double r : sums) row_err = std::max(row_err, std::abs(r - 1.0));
                        ++cases;
                    }
                }
            }
        }
        out.push_back(check(s, "g_msa_sweep", worst <= 1e-6, worst,
                            "cases=" + std::to_string(cases) + " h,w<=8 M=1,2,4 heads=1,2 tol=1e-6"));
        out.push_back(check(s, "g_msa_oracle_rows_stochastic", row_err <= 1e-6, row_err, "tol=1e-6"));
    }

    {   // relative position bias on
        double worst = 0;
        for (auto [h, wd, m] : {std::tuple{4, 4, 2}, {8, 4, 2}, {8, 8, 4}, {6, 3, 3}}) {
            AttentionConfig cfg{4, 2, std::size_t(m), 1, AttentionVariant::g_msa, true};
            auto w = AttentionWeights<double>::zeros(cfg);
            randomize(w, rng);
            const Tensor x = random_uniform<double>({std::size_t(h * wd), 4}, rng);
            const Mat ref = oracle::g_msa(oracle::to_mat(x), oracle::from_weights(w, cfg), h, wd);
            worst = std::max(worst, max_diff(glance_under_test(x, w, PartitionSpec(h, wd, m), cfg, opts.fault), ref));
        }
        out.push_back(check(s, "g_msa_rel_bias", worst <= 1e-6, worst, "tol=1e-6"));
    }

    {   // h = w = M: all three variants coincide
        double worst = 0;
        for (std::size_t m : {1, 2, 4, 7}) {
            AttentionConfig cfg{4, 2, m, 1, AttentionVariant::g_msa, false};
            auto w = AttentionWeights<double>::zeros(cfg);
            randomize(w, rng);
            const Tensor x = random_uniform<double>({m * m, 4}, rng);
            const PartitionSpec spec(m, m, m);
            const Tensor full = run([&](auto&, auto& v) { return msa(v, w, cfg); }, x);
            const Tensor win = run([&](auto&, auto& v) { return w_msa(v, w, spec, cfg); }, x);
            const Tensor gl = glance_under_test(x, w, spec, cfg, opts.fault);
            worst = std::max({worst, max_abs_diff(full, gl), max_abs_diff(full, win)});
            worst = std::max(worst, max_diff(full, oracle::msa(oracle::to_mat(x), oracle::from_weights(w, cfg))));
        }
        out.push_back(check(s, "degenerate_h_eq_w_eq_m", worst <= 1e-9, worst, "M=1,2,4,7 tol=1e-9"));
    }

    {   // window baseline
        AttentionConfig cfg{8, 2, 2, 1, AttentionVariant::w_msa, false};
        auto w = AttentionWeights<double>::zeros(cfg);
        randomize(w, rng);
        const Tensor x = random_uniform<double>({64, 8}, rng);
        const Mat ref = oracle::w_msa(oracle::to_mat(x), oracle::from_weights(w, cfg), 8, 8);
        const double err = max_diff(run([&](auto&, auto& v) { return w_msa(v, w, PartitionSpec(8, 8, 2), cfg); }, x), ref);
        out.push_back(check(s, "w_msa_8x8_m2", err <= 1e-6, err, "tol=1e-6"));
    }

    {   // dilated and window partitions really differ
        AttentionConfig cfg{4, 1, 2, 1, AttentionVariant::g_msa, false};
        auto w = AttentionWeights<double>::zeros(cfg);
        randomize(w, rng);
        const PartitionSpec spec(4, 4, 2);
        Tensor x({16, 4});
        // constant inside each dilated partition, different across partitions
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b)
                for (std::size_t c = 0; c < 4; ++c) x.at(a * 4 + b, c) = double((a % 2) * 2 + b % 2) - 1.5 + 0.1 * c;
        const Tensor g = glance_under_test(x, w, spec, cfg, Fault::none);
        const Tensor l = run([&](auto&, auto& v) { return w_msa(v, w, spec, cfg); }, x);
        const double gap = max_abs_diff(g, l);
        out.push_back(check(s, "g_msa_differs_from_w_msa", gap > 1e-6, gap, "needs gap>1e-6"));
    }

    {   // spatial reduction baseline
        AttentionConfig cfg{4, 2, 1, 2, AttentionVariant::sra, false};
        auto w = AttentionWeights<double>::zeros(cfg);
        randomize(w, rng);
        const Tensor x = random_uniform<double>({16, 4}, rng);
        const Mat ref = oracle::sra(oracle::to_mat(x), oracle::from_weights(w, cfg), 4, 4, 2);
        const double err = max_diff(run([&](auto&, auto& v) { return sra(v, w, 4, 4, cfg); }, x), ref);
        out.push_back(check(s, "sra_4x4_r2", err <= 1e-9, err, "tol=1e-9"));
        AttentionConfig r1 = cfg;
        r1.reduction = 1;
        const double same = max_abs_diff(run([&](auto&, auto& v) { return sra(v, w, 4, 4, r1); }, x),
                                         run([&](auto&, auto& v) { return msa(v, w, r1); }, x));
        out.push_back(check(s, "sra_r1_equals_msa", same <= 1e-9, same, "tol=1e-9"));
    }

    {   // GG-MSA and the full block against straight-line code
        BlockConfig cfg;
        cfg.channels = 4;
        cfg.heads = 2;
        cfg.mlp_ratio = 2;
        cfg.gaze = GazeConfig::fixed(3);
        cfg.spec = PartitionSpec(4, 4, 2);
        double worst_msa = 0, worst_block = 0;
        for (bool bias : {false, true}) {
            cfg.rel_pos_bias = bias;
            const auto w = random_block(cfg, rng);
            const Tensor x = random_uniform<double>({16, 4}, rng);
            worst_msa = std::max(worst_msa, max_diff(run([&](auto&, auto& v) { return gg_msa(v, w, cfg); }, x),
                                                     oracle::gg_msa(oracle::to_mat(x), w, cfg)));
            worst_block = std::max(worst_block, max_diff(run([&](auto&, auto& v) { return gg_block(v, w, cfg); }, x),
                                                         oracle::gg_block(oracle::to_mat(x), w, cfg)));
        }
        out.push_back(check(s, "gg_msa_4x4_m2_c4", worst_msa <= 1e-9, worst_msa, "tol=1e-9"));
        out.push_back(check(s, "gg_block_4x4_m2_c4", worst_block <= 1e-9, worst_block, "tol=1e-9"));

        cfg.rel_pos_bias = false;
        auto w = random_block(cfg, rng);
        w.gaze_kernel = Parameter<double>(Tensor(w.gaze_kernel.value.shape()));
        const Tensor x = random_uniform<double>({16, 4}, rng);
        const double gap = max_abs_diff(run([&](auto&, auto& v) { return gg_msa(v, w, cfg); }, x),
                                        run([&](auto&, auto& v) {
                                            return g_msa(v, w.attn, cfg.spec, cfg.attention());
                                        }, x));
        out.push_back(check(s, "zero_gaze_equals_g_msa", gap == 0.0, gap, "exact"));
    }
    return out;
}

// ---- grad --------------------------------------------------------------------

using Op = std::function<Var<double>(std::vector<Var<double>>&)>;

FdReport fd_primitive(std::vector<Shape> shapes, const Op& op, std::mt19937_64& rng, double tol) {
    std::vector<Parameter<double>> params;
    params.reserve(shapes.size());
    for (const auto& shape : shapes) params.emplace_back(random_uniform<double>(shape, rng));
    std::vector<Parameter<double>*> ptrs;
    for (auto& p : params) ptrs.push_back(&p);
    std::optional<Tensor> weights;
    auto f = [&](Trace<double>& tr) {
        std::vector<Var<double>> in;
        for (auto& p : params) in.push_back(tr.param(p));
        Var<double> y = op(in);
        if (!weights) weights = random_uniform<double>(y.shape(), rng);
        return weighted_sum(y, *weights);
    };
    return finite_diff_check(f, ptrs, tol);
}

std::vector<CheckResult> grad_suite(const VerifyOptions& opts) {
    const std::string s = "grad";
    std::vector<CheckResult> out;
    std::mt19937_64 rng(opts.seed ^ 0x67726164ULL);
    auto dim = [&](std::size_t lo = 1, std::size_t hi = 6) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    const double tol = 1e-5;

    std::vector<std::pair<std::string, std::function<FdReport()>>> cases;
    cases.emplace_back("matmul", [&] {
        const auto m = dim(), k = dim(), n = dim();
        return fd_primitive({{m, k}, {k, n}}, [](auto& v) { return matmul(v[0], v[1]); }, rng, tol);
    });
    cases.emplace_back("transpose", [&] {
        return fd_primitive({{dim(), dim()}}, [](auto& v) { return transpose(v[0]); }, rng, tol);
    });
    cases.emplace_back("add", [&] {
        const Shape sh{dim(), dim()};
        return fd_primitive({sh, sh}, [](auto& v) { return add(v[0], v[1]); }, rng, tol);
    });
    cases.emplace_back("scale", [&] {
        return fd_primitive({{dim(), dim()}}, [](auto& v) { return scale(v[0], -0.7); }, rng, tol);
    });
    cases.emplace_back("linear_bias", [&] {
        const auto n = dim(), ci = dim(), co = dim();
        return fd_primitive({{n, ci}, {ci, co}, {co}}, [](auto& v) { return linear(v[0], v[1], v[2]); }, rng, tol);
    });
    cases.emplace_back("linear", [&] {
        const auto n = dim(), ci = dim(), co = dim();
        return fd_primitive({{n, ci}, {ci, co}}, [](auto& v) { return linear(v[0], v[1]); }, rng, tol);
    });
    cases.emplace_back("softmax_rows", [&] {
        return fd_primitive({{dim(), dim(2)}}, [](auto& v) { return softmax_rows(v[0]); }, rng, tol);
    });
    cases.emplace_back("layer_norm", [&] {
        const auto c = dim(3);
        return fd_primitive({{dim(), c}, {c}, {c}}, [](auto& v) { return layer_norm(v[0], v[1], v[2]); }, rng, tol);
    });
    cases.emplace_back("gelu", [&] {
        return fd_primitive({{dim(), dim()}}, [](auto& v) { return gelu(v[0]); }, rng, tol);
    });
    cases.emplace_back("depthwise_conv2d", [&] {
        const auto c = dim(1, 3);
        return fd_primitive({{c, dim(), dim()}, {c, 3, 5}}, [](auto& v) { return depthwise_conv2d(v[0], v[1]); },
                            rng, tol);
    });
    cases.emplace_back("gather_rows", [&] {
        const auto n = dim(2);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n + 2; ++i) idx.push_back((i * 3) % n);
        return fd_primitive({{n, dim()}}, [idx](auto& v) {
            return gather_rows(v[0], std::span<const std::size_t>(idx));
        }, rng, tol);
    });
    cases.emplace_back("gather", [&] {
        const auto n = dim(2);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < 6; ++i) idx.push_back((i * 5 + 1) % (n * 2));
        return fd_primitive({{n, 2}}, [idx](auto& v) {
            return gather(v[0], std::span<const std::size_t>(idx), {2, 3});
        }, rng, tol);
    });
    cases.emplace_back("slice_rows", [&] {
        return fd_primitive({{5, dim()}}, [](auto& v) { return slice_rows(v[0], 1, 3); }, rng, tol);
    });
    cases.emplace_back("slice_cols", [&] {
        return fd_primitive({{dim(), 5}}, [](auto& v) { return slice_cols(v[0], 2, 2); }, rng, tol);
    });
    cases.emplace_back("concat_rows", [&] {
        const auto c = dim();
        return fd_primitive({{dim(), c}, {dim(), c}}, [](auto& v) { return concat_rows(v); }, rng, tol);
    });
    cases.emplace_back("concat_cols", [&] {
        const auto n = dim();
        return fd_primitive({{n, dim()}, {n, dim()}}, [](auto& v) { return concat_cols(v); }, rng, tol);
    });
    cases.emplace_back("reshape", [&] {
        return fd_primitive({{4, 6}}, [](auto& v) { return reshape(v[0], {3, 8}); }, rng, tol);
    });
    cases.emplace_back("avg_pool_grid", [&] {
        return fd_primitive({{24, 3}}, [](auto& v) { return avg_pool_grid(v[0], 4, 6, 2); }, rng, tol);
    });
    cases.emplace_back("mean_rows", [&] {
        return fd_primitive({{dim(), dim()}}, [](auto& v) { return mean_rows(v[0]); }, rng, tol);
    });
    cases.emplace_back("patchify", [&] {
        return fd_primitive({{2, 4, 6}}, [](auto& v) { return patchify(v[0], 2); }, rng, tol);
    });
    cases.emplace_back("sum", [&] {
        return fd_primitive({{dim(), dim()}}, [](auto& v) { return sum(v[0]); }, rng, tol);
    });
    cases.emplace_back("split_merge", [&] {
        const PartitionSpec spec(4, 6, 2);
        return fd_primitive({{24, 2}}, [spec](auto& v) {
            const auto perm = dilated_split_permutation(spec);
            return matmul(split(v[0], perm), transpose(merge(v[0], perm)));
        }, rng, tol);
    });

    for (auto& [name, fn] : cases) {
        const FdReport r = fn();
        out.push_back(check(s, name, r.passed, r.max_rel_error,
                            "checked=" + std::to_string(r.checked) + " tol=" + fmt(tol)));
    }

    {   // one full block
        BlockConfig cfg;
        cfg.channels = 4;
        cfg.heads = 2;
        cfg.mlp_ratio = 2;
        cfg.spec = PartitionSpec(4, 4, 2);
        cfg.gaze = GazeConfig::adaptive();
        cfg.rel_pos_bias = true;
        auto w = random_block(cfg, rng);
        Parameter<double> x(random_uniform<double>({16, 4}, rng));
        const Tensor weights = random_uniform<double>({16, 4}, rng);
        auto loss = [&](Trace<double>& tr) { return weighted_sum(gg_block(tr.param(x), w, cfg), weights); };
        // The key bias shifts every score of a query row by the same amount, so
        // softmax cancels it and its true gradient is exactly zero. A relative
        // error against central differences would only measure rounding noise;
        // it is checked in absolute terms instead.
        std::vector<Parameter<double>*> ptrs;
        for (auto* p : block_params(w)) {
            if (p != &w.attn.bk) ptrs.push_back(p);
        }
        ptrs.push_back(&x);
        const FdReport r = finite_diff_check(loss, ptrs, 1e-4);
        out.push_back(check(s, "gg_block_h4_w4_m2_c4_a2", r.passed, r.max_rel_error,
                            "checked=" + std::to_string(r.checked) + " tol=1e-4"));

        Parameter<double>* bk[] = {&w.attn.bk};
        const FdReport z = finite_diff_check(loss, bk, 1e-4);
        double analytic = 0;
        for (double g : w.attn.bk.grad.data()) analytic = std::max(analytic, std::abs(g));
        const bool zero = analytic <= 1e-12 && z.max_abs_error <= 1e-8;
        out.push_back(check(s, "gg_block_key_bias_zero_grad", zero, z.max_abs_error,
                            "max|analytic|=" + fmt(analytic) + " abs_tol=1e-8"));
    }
    return out;
}

// ---- perm ----------------------------------------------------------------------

std::vector<CheckResult> perm_suite(const VerifyOptions& opts) {
    const std::string s = "perm";
    std::vector<CheckResult> out;
    std::mt19937_64 rng(opts.seed ^ 0x7065726dULL);

    {   // random specs: bijection and mutual inverses
        std::size_t bad = 0;
        for (int t = 0; t < 100; ++t) {
            const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 7)(rng);
            const std::size_t h = m * std::uniform_int_distribution<std::size_t>(1, 6)(rng);
            const std::size_t w = m * std::uniform_int_distribution<std::size_t>(1, 6)(rng);
            const PartitionSpec spec(h, w, m);
            const Tensor x = random_uniform<double>({h * w, 3}, rng);
            for (const auto& perm : {dilated_split_permutation(spec), window_split_permutation(spec)}) {
                bool ok = perm.is_bijection();
                ok = ok && bitwise_equal(merge(split(x, perm), perm), x);
                ok = ok && bitwise_equal(split(merge(x, perm), perm), x);
                if (!ok) ++bad;
            }
        }
        out.push_back(check(s, "random_specs_inverse", bad == 0, double(bad), "specs=100 failures=" + std::to_string(bad)));
    }

    {   // exhaustive residue-class membership
        std::size_t specs = 0, bad = 0;
        for (std::size_t h = 1; h <= 16; ++h) {
            for (std::size_t w = 1; w <= 16; ++w) {
                for (std::size_t m = 1; m <= std::min(h, w); ++m) {
                    if (h % m || w % m) continue;
                    ++specs;
                    const PartitionSpec spec(h, w, m);
                    const auto dil = dilated_split_permutation(spec);
                    const auto win = window_split_permutation(spec);
                    const std::size_t dh = h / m, dw = w / m, n = m * m;
                    bool ok = dil.is_bijection() && win.is_bijection();
                    for (std::size_t k = 0; ok && k < dil.size(); ++k) {
                        const std::size_t part = k / n, i = part / dw, j = part % dw;
                        const std::size_t a = dil.forward[k] / w, b = dil.forward[k] % w;
                        ok = a % dh == i && b % dw == j;
                        const std::size_t wa = win.forward[k] / w, wb = win.forward[k] % w;
                        ok = ok && wa / m == i && wb / m == j;
                    }
                    if (!ok) ++bad;
                }
            }
        }
        out.push_back(check(s, "residue_classes_exhaustive", bad == 0, double(bad),
                            "specs=" + std::to_string(specs) + " h,w<=16 failures=" + std::to_string(bad)));
    }

    {   // enumerated examples
        const auto p = dilated_split_permutation(PartitionSpec(4, 4, 2));
        const bool a = std::vector<std::size_t>(p.forward.begin(), p.forward.begin() + 4) ==
                       std::vector<std::size_t>{0, 2, 8, 10};
        const auto q = dilated_split_permutation(PartitionSpec(4, 8, 2));
        // partition (1, 3) is the 8th (index 7) in row-major order over a 2 x 4 partition grid
        const bool b = std::vector<std::size_t>(q.forward.begin() + 28, q.forward.begin() + 32) ==
                       std::vector<std::size_t>{1 * 8 + 3, 1 * 8 + 7, 3 * 8 + 3, 3 * 8 + 7};
        const auto r = window_split_permutation(PartitionSpec(4, 4, 2));
        const bool c = std::vector<std::size_t>(r.forward.begin(), r.forward.begin() + 4) ==
                       std::vector<std::size_t>{0, 1, 4, 5};
        bool d = true;
        for (std::size_t m : {1, 2, 3, 7}) {
            const PartitionSpec spec(m, m, m);
            d = d && dilated_split_permutation(spec).forward == Permutation::identity(m * m).forward &&
                window_split_permutation(spec).forward == Permutation::identity(m * m).forward;
        }
        out.push_back(check(s, "dilated_4x4_m2_partition00", a, 0, "{(0,0),(0,2),(2,0),(2,2)}"));
        out.push_back(check(s, "dilated_4x8_m2_partition13", b, 0, "{(1,3),(1,7),(3,3),(3,7)}"));
        out.push_back(check(s, "window_4x4_m2_window00", c, 0, "{(0,0),(0,1),(1,0),(1,1)}"));
        out.push_back(check(s, "single_partition_identity", d, 0, "h=w=M"));
    }
    return out;
}

// ---- flops ---------------------------------------------------------------------

std::uint64_t executed_macs(const Trace<double>& tr) { return count_executed(tr).total().macs; }

std::vector<CheckResult> flops_suite(const VerifyOptions& opts) {
    const std::string s = "flops";
    std::vector<CheckResult> out;
    std::mt19937_64 rng(opts.seed ^ 0x666c6f70ULL);

    const bool spots = omega_msa(196, 96) == 14601216ULL && omega_g_msa(3136, 96, 7) == 145108992ULL &&
                       omega_gg_msa(3136, 96, 7, 9) == 169494528ULL;
    out.push_back(check(s, "omega_spot_values", spots, 0, "14601216 145108992 169494528"));

    {   // formula parity on random geometry
        std::size_t bad = 0;
        auto pick = [&](std::size_t lo, std::size_t hi) {
            return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
        };
        for (int t = 0; t < 20; ++t) {
            const std::size_t m = pick(1, 4), h = m * pick(1, 4), w = m * pick(1, 4);
            const std::size_t heads = pick(1, 3), c = heads * pick(1, 4), k = 2 * pick(0, 3) + 1;
            const std::size_t n = h * w;
            BlockConfig bc;
            bc.channels = c;
            bc.heads = heads;
            bc.gaze = GazeConfig::fixed(k);
            bc.spec = PartitionSpec(h, w, m);
            bc.rel_pos_bias = t % 2 == 0;
            const auto bw = BlockWeights<double>::zeros(bc);
            const Tensor x = random_uniform<double>({n, c}, rng);
            std::uint64_t gg, gl, full;
            {
                Trace<double> tr(GradMode::off);
                gg_msa(tr.constant(x), bw, bc);
                gg = executed_macs(tr);
            }
            {
                Trace<double> tr(GradMode::off);
                g_msa(tr.constant(x), bw.attn, bc.spec, bc.attention());
                gl = executed_macs(tr);
            }
            {
                Trace<double> tr(GradMode::off);
                AttentionConfig ac = bc.attention();
                ac.variant = AttentionVariant::msa;
                msa(tr.constant(x), bw.attn, ac);
                full = executed_macs(tr);
            }
            if (gg != omega_gg_msa(n, c, m, k) || gl != omega_g_msa(n, c, m) || full != omega_msa(n, c)) ++bad;
        }
        out.push_back(check(s, "formula_parity_random20", bad == 0, double(bad), "gg_msa g_msa msa exact"));
    }

    {
        const auto cfg = ModelConfig::preset(ModelVariant::gg_t);
        std::vector<std::size_t> ks;
        for (std::size_t st = 0; st < kStages; ++st) ks.push_back(cfg.block(st).gaze.kernel(cfg.block(st).spec).first);
        const auto geo = cfg.stages();
        const bool grids = geo[0].h == 56 && geo[1].h == 28 && geo[2].h == 14 && geo[3].h == 7;
        out.push_back(check(s, "adaptive_kernels_9_5_3_3", grids && ks == std::vector<std::size_t>{9, 5, 3, 3}, 0,
                            "kernels=" + std::to_string(ks[0]) + "," + std::to_string(ks[1]) + "," +
                                std::to_string(ks[2]) + "," + std::to_string(ks[3])));
    }

    for (auto v : {ModelVariant::gg_t, ModelVariant::gg_s}) {
        const auto cfg = ModelConfig::preset(v);
        const auto report = count_model(cfg);
        const auto t = report.total();
        const std::uint64_t enumerated = zero_model<float>(cfg).parameter_count();
        const double p_target = v == ModelVariant::gg_t ? 28e6 : 50e6;
        const double m_target = v == ModelVariant::gg_t ? 4.5e9 : 8.7e9;
        const double p_dev = std::abs(double(t.params) / p_target - 1.0);
        const double m_dev = std::abs(double(t.macs) / m_target - 1.0);
        out.push_back(check(s, to_string(v) + "_param_enumeration", enumerated == t.params,
                            double(enumerated) - double(t.params),
                            "symbolic=" + std::to_string(t.params) + " enumerated=" + std::to_string(enumerated)));
        out.push_back(check(s, to_string(v) + "_param_budget", p_dev <= 0.03, p_dev,
                            "params=" + std::to_string(t.params) + " tol=3%"));
        out.push_back(check(s, to_string(v) + "_mac_budget", m_dev <= 0.05, m_dev,
                            "macs=" + std::to_string(t.macs) + " tol=5%"));

        bool parity = true;
        for (std::size_t st = 0; st < kStages; ++st) {
            const auto bc = cfg.block(st);
            const auto [kh, kw] = bc.gaze.kernel(bc.spec);
            const std::string p = "stage" + std::to_string(st + 1) + ".block0.attn.";
            const std::uint64_t attn = report.find(p + "proj")->macs + report.find(p + "attend")->macs +
                                       report.find(p + "gaze")->macs;
            parity = parity && attn == omega_gg_msa(bc.spec.tokens(), bc.channels, bc.spec.m(), kh, kw);
        }
        out.push_back(check(s, to_string(v) + "_attention_terms", parity, 0, "per-stage attention == omega_gg_msa"));
    }

    if (opts.full_model) {
        const auto cfg = ModelConfig::preset(ModelVariant::gg_t);
        const auto weights = zero_model<float>(cfg);
        Trace<float> tr(GradMode::off);
        forward(tr.constant(TensorF({3, 224, 224})), weights);
        const FlopsReport executed = count_executed(tr);
        const FlopsReport symbolic = count_model(cfg);
        const bool same = executed.entries == symbolic.entries;
        out.push_back(check(s, "gg-t_executed_equals_symbolic", same,
                            double(executed.total().macs) - double(symbolic.total().macs),
                            "executed_macs=" + std::to_string(executed.total().macs) +
                                " symbolic_macs=" + std::to_string(symbolic.total().macs)));
    }
    return out;
}

} // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"oracle", "grad", "perm", "flops"};
    return names;
}

std::vector<CheckResult> run_suite(const std::string& suite, const VerifyOptions& opts) {
    if (suite == "all") {
        std::vector<CheckResult> all;
        for (const auto& name : suite_names()) {
            auto part = run_suite(name, opts);
            all.insert(all.end(), part.begin(), part.end());
        }
        return all;
    }
    if (suite == "oracle") return oracle_suite(opts);
    if (suite == "grad") return grad_suite(opts);
    if (suite == "perm") return perm_suite(opts);
    if (suite == "flops") return flops_suite(opts);
    throw ConfigError("unknown suite '" + suite + "' (expected oracle, grad, perm, flops or all)");
}

std::string format_check(const CheckResult& r) {
    return "check suite=" + r.suite + " name=" + r.name + " status=" + (r.passed ? "pass" : "fail") +
           " metric=" + fmt(r.metric) + (r.detail.empty() ? "" : " " + r.detail);
}

} // namespace ggt
