#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ggt/ops.hpp"
#include "ggt/tensor_io.hpp"

using namespace ggt;

TEST_CASE("tensor construction keeps numel equal to the shape product") {
    Tensor t({2, 3, 4}, 1.5);
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.dim(2) == 4);
    CHECK(t[23] == 1.5);
    CHECK_THROWS_AS(Tensor(Shape{2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor(Shape{}), DimensionError);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(t.reshaped({5, 5}), DimensionError);
    CHECK(t.reshaped({6, 4}).shape() == Shape{6, 4});
}

TEST_CASE("matmul") {
    const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
    const Tensor b = Tensor::from_rows({{5}, {6}});
    CHECK(matmul(a, b) == Tensor::from_rows({{17}, {39}}));
    CHECK(matmul(identity<double>(2), a) == a);
    CHECK(matmul(Tensor({1, 1}, 2.0), Tensor({1, 1}, 3.0))[0] == 6.0);

    SUBCASE("mismatch names both shapes") {
        try {
            matmul(a, Tensor({3, 1}));
            FAIL("expected DimensionError");
        } catch (const DimensionError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("[2x2]") != std::string::npos);
            CHECK(msg.find("[3x1]") != std::string::npos);
        }
    }

    SUBCASE("identity product is bitwise stable") {
        std::mt19937_64 rng(3);
        const Tensor x = random_uniform<double>({5, 7}, rng), y = random_uniform<double>({7, 3}, rng);
        CHECK(bitwise_equal(matmul(matmul(identity<double>(5), x), y), matmul(x, y)));
    }
}

TEST_CASE("softmax_rows") {
    const Tensor u = softmax_rows(Tensor({1, 4}));
    for (double v : u.data()) CHECK(v == doctest::Approx(0.25));

    const double c = 1.7;
    const Tensor s = softmax_rows(Tensor::from_rows({{0.3, 0.3 + c}}));
    CHECK(s[0] == doctest::Approx(1.0 / (1.0 + std::exp(c))).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(std::exp(c) / (1.0 + std::exp(c))).epsilon(1e-12));

    const Tensor big = softmax_rows(Tensor::from_rows({{1000, 0}}));
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] == doctest::Approx(0.0));

    CHECK_THROWS_AS(softmax_rows(Tensor::from_rows({{1, std::nan("")}})), NumericError);

    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
        const Tensor x = random_uniform<double>({3, 9}, rng, 50.0);
        const Tensor y = softmax_rows(x);
        for (std::size_t r = 0; r < 3; ++r) {
            double sum = 0;
            for (std::size_t j = 0; j < 9; ++j) {
                CHECK(y.at(r, j) >= 0.0);
                sum += y.at(r, j);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("layer_norm") {
    const Tensor one({1, 3}, 1.0), zero({3}, 0.0);
    const Tensor k = layer_norm(Tensor({2, 3}, 4.0), one.reshaped({3}), zero);
    for (double v : k.data()) CHECK(v == 0.0);

    const Tensor b({3}, 0.25);
    std::mt19937_64 rng(1);
    const Tensor collapsed = layer_norm(random_uniform<double>({4, 3}, rng), zero, b);
    for (double v : collapsed.data()) CHECK(v == 0.25);

    const Tensor pair = layer_norm(Tensor::from_rows({{1, 3}}), Tensor({2}, 1.0), Tensor({2}), 0.0);
    CHECK(pair[0] == doctest::Approx(-1.0));
    CHECK(pair[1] == doctest::Approx(1.0));

    const Tensor x = random_uniform<double>({20, 16}, rng, 3.0);
    const Tensor y = layer_norm(x, Tensor({16}, 1.0), Tensor({16}));
    for (std::size_t r = 0; r < 20; ++r) {
        double mean = 0, var = 0;
        for (std::size_t j = 0; j < 16; ++j) mean += y.at(r, j);
        mean /= 16;
        for (std::size_t j = 0; j < 16; ++j) var += (y.at(r, j) - mean) * (y.at(r, j) - mean);
        var /= 16;
        CHECK(std::abs(mean) <= 1e-6);
        CHECK(std::abs(var - 1.0) <= 1e-4);
    }
    CHECK_THROWS_AS(layer_norm(x, Tensor({15}, 1.0), Tensor({15})), DimensionError);
}

TEST_CASE("linear") {
    const Tensor x = Tensor::from_rows({{1, 2}});
    const Tensor b({2}, 1.0);
    CHECK(linear(x, identity<double>(2), &b) == Tensor::from_rows({{2, 3}}));
    CHECK(linear(x, identity<double>(2), static_cast<const Tensor*>(nullptr)) == x);
    const Tensor bias(Shape{2}, std::vector<double>{0.5, -1});
    CHECK(linear(Tensor({3, 2}), identity<double>(2), &bias) == Tensor::from_rows({{0.5, -1}, {0.5, -1}, {0.5, -1}}));
    CHECK_THROWS_AS(linear(x, Tensor({3, 2}), static_cast<const Tensor*>(nullptr)), DimensionError);
    const Tensor wrong({3});
    CHECK_THROWS_AS(linear(x, identity<double>(2), &wrong), DimensionError);
}

TEST_CASE("gelu uses the exact erf form") {
    const Tensor y = gelu(Tensor::from_rows({{0, 1, 12, -12}}));
    CHECK(y[0] == 0.0);
    CHECK(y[1] == doctest::Approx(0.8413447460685429).epsilon(1e-14));
    CHECK(y[2] == doctest::Approx(12.0));
    CHECK(std::abs(y[3]) < 1e-12);
}

TEST_CASE("depthwise_conv2d") {
    Tensor center({1, 3, 3});
    center[4] = 1.0;
    std::mt19937_64 rng(2);
    const Tensor x = random_uniform<double>({1, 4, 5}, rng);
    CHECK(depthwise_conv2d(x, center) == x);
    CHECK(depthwise_conv2d(Tensor({1, 4, 5}), random_uniform<double>({1, 3, 3}, rng)) == Tensor({1, 4, 5}));

    const Tensor ones = depthwise_conv2d(Tensor({1, 3, 3}, 1.0), Tensor({1, 3, 3}, 1.0));
    CHECK(ones.storage() == std::vector<double>{4, 6, 4, 6, 9, 6, 4, 6, 4});

    CHECK_THROWS_AS(depthwise_conv2d(x, Tensor({1, 2, 3})), ConfigError);
    CHECK_THROWS_AS(depthwise_conv2d(x, Tensor({2, 3, 3})), DimensionError);

    SUBCASE("linearity") {
        const Tensor k = random_uniform<double>({3, 5, 3}, rng);
        const Tensor a = random_uniform<double>({3, 6, 7}, rng), b = random_uniform<double>({3, 6, 7}, rng);
        Tensor mix(a.shape());
        for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = 0.3 * a[i] - 1.7 * b[i];
        const Tensor lhs = depthwise_conv2d(mix, k);
        const Tensor ca = depthwise_conv2d(a, k), cb = depthwise_conv2d(b, k);
        double worst = 0;
        for (std::size_t i = 0; i < lhs.numel(); ++i) worst = std::max(worst, std::abs(lhs[i] - (0.3 * ca[i] - 1.7 * cb[i])));
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("GGT1 round trip and malformed input") {
    std::mt19937_64 rng(5);
    const TensorF t = random_uniform<float>({2, 3, 4}, rng);
    std::stringstream buf;
    write_ggt1(buf, t);
    CHECK(buf.str().size() == ggt1_record_size(t.shape()));
    CHECK(buf.str().substr(0, 4) == "GGT1");
    CHECK(static_cast<unsigned char>(buf.str()[4]) == 3); // rank, little endian
    const TensorF back = read_ggt1(buf);
    CHECK(bitwise_equal(back, t));

    std::stringstream bad("XXXX");
    CHECK_THROWS_AS(read_ggt1(bad), FormatError);
    std::stringstream truncated(buf.str().substr(0, 20));
    CHECK_THROWS_AS(read_ggt1(truncated), FormatError);
    std::string zero = buf.str();
    zero[8] = 0; // first extent
    std::stringstream zs(zero);
    CHECK_THROWS_AS(read_ggt1(zs), FormatError);
}
