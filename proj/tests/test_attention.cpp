#include <doctest.h>

#include <random>

#include "ggt/attention.hpp"
#include "ggt/oracle.hpp"

using namespace ggt;

namespace {

AttentionWeights<double> random_weights(const AttentionConfig& cfg, std::mt19937_64& rng) {
    auto w = AttentionWeights<double>::zeros(cfg);
    for (auto* p : {&w.wq, &w.wk, &w.wv, &w.wo, &w.bq, &w.bk, &w.bv, &w.bo}) {
        *p = Parameter<double>(random_uniform<double>(p->value.shape(), rng, 0.5));
    }
    if (w.has_rel_bias) w.rel_bias = Parameter<double>(random_uniform<double>(w.rel_bias.value.shape(), rng, 0.5));
    return w;
}

template <typename F>
Tensor eval(const Tensor& x, F f) {
    Trace<double> tr(GradMode::off);
    return f(tr.constant(x)).value();
}

double diff(const Tensor& a, const oracle::Mat& b) { return max_abs_diff(a, oracle::from_mat(b)); }

} // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS((AttentionConfig{6, 4}.validate()), ConfigError);
    CHECK_THROWS_AS((AttentionConfig{4, 2, 0}.validate()), ConfigError);
    CHECK_THROWS_AS((AttentionConfig{4, 2, 1, 0}.validate()), ConfigError);
    CHECK(parse_attention_variant("gmsa") == AttentionVariant::g_msa);
    CHECK(parse_attention_variant("w-msa") == AttentionVariant::w_msa);
    CHECK_THROWS_AS(parse_attention_variant("swin"), ConfigError);
}

TEST_CASE("msa single token and uniform attention") {
    std::mt19937_64 rng(1);
    const AttentionConfig cfg{4, 2};
    auto w = random_weights(cfg, rng);
    const Tensor x1 = random_uniform<double>({1, 4}, rng);
    const Tensor y1 = eval(x1, [&](auto v) { return msa(v, w, cfg); });
    const Tensor v1 = linear(x1, w.wv.value, &w.bv.value);
    CHECK(max_abs_diff(y1, linear(v1, w.wo.value, &w.bo.value)) <= 1e-12);

    auto u = AttentionWeights<double>::zeros(cfg);
    u.wv.value = identity<double>(4);
    u.wo.value = identity<double>(4);
    const Tensor x = random_uniform<double>({7, 4}, rng);
    const Tensor y = eval(x, [&](auto v) { return msa(v, u, cfg); });
    for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0;
        for (std::size_t r = 0; r < 7; ++r) mean += x.at(r, c);
        mean /= 7;
        for (std::size_t r = 0; r < 7; ++r) CHECK(y.at(r, c) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("msa matches the naive oracle") {
    std::mt19937_64 rng(2);
    for (std::size_t heads : {1, 2, 4}) {
        const AttentionConfig cfg{4, heads};
        const auto w = random_weights(cfg, rng);
        const Tensor x = random_uniform<double>({6, 4}, rng);
        CHECK(diff(eval(x, [&](auto v) { return msa(v, w, cfg); }), oracle::msa(oracle::to_mat(x), oracle::from_weights(w, cfg))) <= 1e-9);
    }
    CHECK_THROWS_AS(eval(Tensor({6, 3}), [&](auto v) {
        const AttentionConfig cfg{4, 1};
        return msa(v, AttentionWeights<double>::zeros(cfg), cfg);
    }), DimensionError);
}

TEST_CASE("g_msa equals per-partition attention over all small grids") {
    std::mt19937_64 rng(3);
    for (std::size_t h = 1; h <= 8; ++h) {
        for (std::size_t wd = 1; wd <= 8; ++wd) {
            for (std::size_t m : {1, 2, 4}) {
                if (h % m || wd % m) continue;
                for (std::size_t heads : {1, 2}) {
                    const AttentionConfig cfg{4, heads, m, 1, AttentionVariant::g_msa, false};
                    const auto w = random_weights(cfg, rng);
                    const Tensor x = random_uniform<double>({h * wd, 4}, rng);
                    const Tensor y = eval(x, [&](auto v) { return g_msa(v, w, PartitionSpec(h, wd, m), cfg); });
                    CHECK(y.shape() == x.shape());
                    CHECK(diff(y, oracle::g_msa(oracle::to_mat(x), oracle::from_weights(w, cfg), h, wd)) <= 1e-6);
                }
            }
        }
    }
}

TEST_CASE("g_msa at 8x8 with M=2 against a 16-partition brute force") {
    std::mt19937_64 rng(4);
    const AttentionConfig cfg{8, 2, 2, 1, AttentionVariant::g_msa, true};
    const auto w = random_weights(cfg, rng);
    const Tensor x = random_uniform<double>({64, 8}, rng);
    const Tensor y = eval(x, [&](auto v) { return g_msa(v, w, PartitionSpec(8, 8, 2), cfg); });
    CHECK(diff(y, oracle::g_msa(oracle::to_mat(x), oracle::from_weights(w, cfg), 8, 8)) <= 1e-6);
    CHECK_THROWS_AS(eval(Tensor({63, 8}), [&](auto v) { return g_msa(v, w, PartitionSpec(8, 8, 2), cfg); }),
                    DimensionError);
    CHECK_THROWS_AS(eval(Tensor({64, 8}), [&](auto v) { return g_msa(v, w, PartitionSpec(8, 8, 4), cfg); }),
                    ConfigError);
}

TEST_CASE("single partition: msa, g_msa and w_msa agree") {
    std::mt19937_64 rng(5);
    for (std::size_t m : {1, 2, 3, 5}) {
        const AttentionConfig cfg{6, 3, m};
        const auto w = random_weights(cfg, rng);
        const Tensor x = random_uniform<double>({m * m, 6}, rng);
        const PartitionSpec s(m, m, m);
        const Tensor a = eval(x, [&](auto v) { return msa(v, w, cfg); });
        CHECK(max_abs_diff(a, eval(x, [&](auto v) { return g_msa(v, w, s, cfg); })) <= 1e-9);
        CHECK(max_abs_diff(a, eval(x, [&](auto v) { return w_msa(v, w, s, cfg); })) <= 1e-9);
    }
}

TEST_CASE("w_msa matches the per-window oracle and differs from g_msa") {
    std::mt19937_64 rng(6);
    const AttentionConfig cfg{4, 1, 2};
    const auto w = random_weights(cfg, rng);
    const Tensor x = random_uniform<double>({64, 4}, rng);
    const PartitionSpec s(8, 8, 2);
    const Tensor y = eval(x, [&](auto v) { return w_msa(v, w, s, cfg); });
    CHECK(diff(y, oracle::w_msa(oracle::to_mat(x), oracle::from_weights(w, cfg), 8, 8)) <= 1e-6);

    Tensor c({16, 4});
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t k = 0; k < 4; ++k) c.at(a * 4 + b, k) = double((a % 2) * 2 + b % 2) + 0.25 * k;
    const PartitionSpec t(4, 4, 2);
    CHECK(max_abs_diff(eval(c, [&](auto v) { return g_msa(v, w, t, cfg); }),
                       eval(c, [&](auto v) { return w_msa(v, w, t, cfg); })) > 1e-3);
}

TEST_CASE("g_msa is equivariant to within-partition permutations without position bias") {
    std::mt19937_64 rng(7);
    const AttentionConfig cfg{4, 2, 2};
    const auto w = random_weights(cfg, rng);
    const PartitionSpec s(4, 4, 2);
    const Tensor x = random_uniform<double>({16, 4}, rng);
    // swap tokens (0,0) and (2,2), both in partition (0,0)
    std::vector<std::size_t> idx(16);
    for (std::size_t i = 0; i < 16; ++i) idx[i] = i;
    std::swap(idx[0], idx[10]);
    Tensor xp(x.shape());
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t k = 0; k < 4; ++k) xp.at(r, k) = x.at(idx[r], k);
    const Tensor y = eval(x, [&](auto v) { return g_msa(v, w, s, cfg); });
    const Tensor yp = eval(xp, [&](auto v) { return g_msa(v, w, s, cfg); });
    double worst = 0;
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::abs(yp.at(r, k) - y.at(idx[r], k)));
    CHECK(worst <= 1e-12);
}

TEST_CASE("sra baselines") {
    std::mt19937_64 rng(8);
    const AttentionConfig cfg{4, 2, 1, 2, AttentionVariant::sra};
    const auto w = random_weights(cfg, rng);
    const Tensor x = random_uniform<double>({16, 4}, rng);
    const Tensor y = eval(x, [&](auto v) { return sra(v, w, 4, 4, cfg); });
    CHECK(diff(y, oracle::sra(oracle::to_mat(x), oracle::from_weights(w, cfg), 4, 4, 2)) <= 1e-9);

    AttentionConfig one = cfg;
    one.reduction = 1;
    CHECK(max_abs_diff(eval(x, [&](auto v) { return sra(v, w, 4, 4, one); }),
                       eval(x, [&](auto v) { return msa(v, w, one); })) <= 1e-9);

    AttentionConfig all = cfg;
    all.reduction = 4;
    const Tensor collapsed = eval(x, [&](auto v) { return sra(v, w, 4, 4, all); });
    Tensor mean({1, 4});
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t k = 0; k < 4; ++k) mean[k] += x.at(r, k) / 16;
    const Tensor expect = linear(linear(mean, w.wv.value, &w.bv.value), w.wo.value, &w.bo.value);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t k = 0; k < 4; ++k) CHECK(collapsed.at(r, k) == doctest::Approx(expect[k]).epsilon(1e-12));

    AttentionConfig odd = cfg;
    odd.reduction = 3;
    CHECK_THROWS_AS(eval(x, [&](auto v) { return sra(v, w, 4, 4, odd); }), ConfigError);
}

TEST_CASE("relative bias index covers the table") {
    const auto idx = relative_bias_index(3, 2, 1);
    CHECK(idx.size() == 81);
    // query (0,0) against key (0,0): centre offset (2,2) of a 5x5 table
    CHECK(idx[0] == (2 * 5 + 2) * 2 + 1);
    // query (0,0) against key (2,2): offset (0,0)
    CHECK(idx[8] == 1);
    for (auto i : idx) CHECK(i < 25 * 2);
}
