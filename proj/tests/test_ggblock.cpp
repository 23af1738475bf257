#include <doctest.h>

#include <random>

#include "ggt/ggblock.hpp"
#include "ggt/oracle.hpp"

using namespace ggt;

namespace {

BlockConfig toy(std::size_t c = 4, std::size_t heads = 2, double alpha = 2) {
    BlockConfig cfg;
    cfg.channels = c;
    cfg.heads = heads;
    cfg.mlp_ratio = alpha;
    cfg.spec = PartitionSpec(4, 4, 2);
    cfg.gaze = GazeConfig::fixed(3);
    cfg.rel_pos_bias = false;
    return cfg;
}

BlockWeights<double> random_block(const BlockConfig& cfg, std::mt19937_64& rng) {
    auto w = BlockWeights<double>::zeros(cfg);
    for (auto* p : {&w.norm1_gamma, &w.norm1_beta, &w.attn.wq, &w.attn.bq, &w.attn.wk, &w.attn.bk, &w.attn.wv,
                    &w.attn.bv, &w.attn.wo, &w.attn.bo, &w.gaze_kernel, &w.norm2_gamma, &w.norm2_beta, &w.fc1_w,
                    &w.fc1_b, &w.fc2_w, &w.fc2_b}) {
        *p = Parameter<double>(random_uniform<double>(p->value.shape(), rng, 0.5));
    }
    if (w.attn.has_rel_bias) w.attn.rel_bias = Parameter<double>(random_uniform<double>(w.attn.rel_bias.value.shape(), rng));
    return w;
}

template <typename F>
Tensor eval(const Tensor& x, F f) {
    Trace<double> tr(GradMode::off);
    return f(tr.constant(x)).value();
}

} // namespace

TEST_CASE("adaptive kernel rule") {
    CHECK(adaptive_kernel_size(8) == 9);
    CHECK(adaptive_kernel_size(4) == 5);
    CHECK(adaptive_kernel_size(2) == 3);
    CHECK(adaptive_kernel_size(1) == 3);
    CHECK(adaptive_kernel_size(3) == 5);
    const std::size_t grids[] = {56, 28, 14, 7};
    const std::size_t expect[] = {9, 5, 3, 3};
    for (int s = 0; s < 4; ++s) {
        const auto k = GazeConfig::adaptive().kernel(PartitionSpec(grids[s], grids[s], 7));
        CHECK(k.first == expect[s]);
        CHECK(k.second == expect[s]);
    }
    CHECK(GazeConfig::adaptive().kernel(PartitionSpec(56, 28, 7)) == std::pair<std::size_t, std::size_t>{9, 5});
    CHECK(GazeConfig::fixed(3).kernel(PartitionSpec(56, 56, 7)).first == 3);
    CHECK_THROWS_AS(GazeConfig::fixed(4).kernel(PartitionSpec(8, 8, 2)), ConfigError);
    CHECK_THROWS_AS(adaptive_kernel_size(0), ConfigError);
}

TEST_CASE("block config validation") {
    BlockConfig cfg = toy();
    cfg.mlp_ratio = 1.3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.mlp_ratio = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy(6, 4);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("gaze branch") {
    const PartitionSpec s(4, 4, 2);
    std::mt19937_64 rng(1);
    const Tensor v = random_uniform<double>({16, 2}, rng);
    Tensor centre({2, 3, 3});
    centre[4] = centre[13] = 1.0;
    Trace<double> tr(GradMode::off);
    CHECK(gaze(tr.constant(v), tr.constant(centre), s).value() == v);
    const Tensor zero = gaze(tr.constant(v), tr.constant(Tensor({2, 3, 3})), s).value();
    for (double z : zero.data()) CHECK(z == 0.0);

    const Tensor ones = gaze(tr.constant(Tensor({16, 1}, 1.0)), tr.constant(Tensor({1, 3, 3}, 1.0)), s).value();
    CHECK(ones.storage() == std::vector<double>{4, 6, 6, 4, 6, 9, 9, 6, 6, 9, 9, 6, 4, 6, 6, 4});
    CHECK_THROWS_AS(gaze(tr.constant(Tensor({15, 2})), tr.constant(centre), s), DimensionError);
}

TEST_CASE("gg_msa") {
    std::mt19937_64 rng(2);
    BlockConfig cfg = toy();

    SUBCASE("zero gaze kernel reduces to g_msa exactly") {
        auto w = random_block(cfg, rng);
        w.gaze_kernel = Parameter<double>(Tensor(w.gaze_kernel.value.shape()));
        const Tensor x = random_uniform<double>({16, 4}, rng);
        const Tensor a = eval(x, [&](auto v) { return gg_msa(v, w, cfg); });
        const Tensor b = eval(x, [&](auto v) { return g_msa(v, w.attn, cfg.spec, cfg.attention()); });
        CHECK(max_abs_diff(a, b) == 0.0);
    }

    SUBCASE("uniform attention plus identity gaze") {
        auto w = BlockWeights<double>::zeros(cfg);
        w.attn.wv.value = identity<double>(4);
        w.attn.wo.value = identity<double>(4);
        w.gaze_kernel.value[4] = w.gaze_kernel.value[13] = w.gaze_kernel.value[22] = w.gaze_kernel.value[31] = 1.0;
        const Tensor x = random_uniform<double>({16, 4}, rng);
        const Tensor y = eval(x, [&](auto v) { return gg_msa(v, w, cfg); });
        for (std::size_t a = 0; a < 4; ++a) {
            for (std::size_t b = 0; b < 4; ++b) {
                for (std::size_t c = 0; c < 4; ++c) {
                    double mean = 0;
                    for (std::size_t p = 0; p < 2; ++p)
                        for (std::size_t q = 0; q < 2; ++q) mean += x.at((a % 2 + 2 * p) * 4 + b % 2 + 2 * q, c) / 4;
                    CHECK(y.at(a * 4 + b, c) == doctest::Approx(mean + x.at(a * 4 + b, c)).epsilon(1e-12));
                }
            }
        }
    }

    SUBCASE("straight-line oracle") {
        for (bool bias : {false, true}) {
            cfg.rel_pos_bias = bias;
            cfg.gaze = bias ? GazeConfig::adaptive() : GazeConfig::fixed(3);
            const auto w = random_block(cfg, rng);
            const Tensor x = random_uniform<double>({16, 4}, rng);
            CHECK(max_abs_diff(eval(x, [&](auto v) { return gg_msa(v, w, cfg); }),
                               oracle::from_mat(oracle::gg_msa(oracle::to_mat(x), w, cfg))) <= 1e-9);
            CHECK(max_abs_diff(eval(x, [&](auto v) { return gg_block(v, w, cfg); }),
                               oracle::from_mat(oracle::gg_block(oracle::to_mat(x), w, cfg))) <= 1e-9);
        }
    }
}

TEST_CASE("gg_block residual and shape properties") {
    std::mt19937_64 rng(3);
    BlockConfig cfg = toy();
    auto w = BlockWeights<double>::zeros(cfg);
    w.norm1_gamma.value = Tensor({4});
    w.norm2_gamma.value = Tensor({4});
    const Tensor x = random_uniform<double>({16, 4}, rng);
    CHECK(eval(x, [&](auto v) { return gg_block(v, w, cfg); }) == x);

    for (int t = 0; t < 50; ++t) {
        auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
        BlockConfig c;
        c.heads = pick(1, 3);
        c.channels = c.heads * pick(1, 3);
        c.mlp_ratio = double(pick(1, 4));
        const std::size_t m = pick(1, 3);
        c.spec = PartitionSpec(m * pick(1, 3), m * pick(1, 3), m);
        c.gaze = t % 2 ? GazeConfig::adaptive() : GazeConfig::fixed(2 * pick(0, 2) + 1);
        c.rel_pos_bias = t % 3 == 0;
        const auto bw = random_block(c, rng);
        const Tensor in = random_uniform<double>({c.spec.tokens(), c.channels}, rng);
        CHECK(eval(in, [&](auto v) { return gg_block(v, bw, c); }).shape() == in.shape());
    }
}

TEST_CASE("gg_block gradient check") {
    std::mt19937_64 rng(4);
    BlockConfig cfg = toy(4, 2, 2);
    cfg.rel_pos_bias = true;
    cfg.gaze = GazeConfig::adaptive();
    auto w = random_block(cfg, rng);
    Parameter<double> x(random_uniform<double>({16, 4}, rng));
    const Tensor mix = random_uniform<double>({16, 4}, rng);
    // key bias excluded: its exact gradient is zero (softmax shift invariance)
    std::vector<Parameter<double>*> ps{&x, &w.norm1_gamma, &w.norm1_beta, &w.attn.wq, &w.attn.bq, &w.attn.wk,
                                       &w.attn.wv, &w.attn.bv, &w.attn.wo, &w.attn.bo, &w.attn.rel_bias,
                                       &w.gaze_kernel, &w.norm2_gamma, &w.norm2_beta, &w.fc1_w, &w.fc1_b,
                                       &w.fc2_w, &w.fc2_b};
    const FdReport r = finite_diff_check([&](Trace<double>& tr) {
        return weighted_sum(gg_block(tr.param(x), w, cfg), mix);
    }, ps, 1e-4);
    CHECK(r.passed);
    CHECK(r.max_rel_error <= 1e-4);
    for (double g : w.attn.bk.grad.data()) CHECK(std::abs(g) <= 1e-12);
}
