#include <cmath>
#include <set>

#include "catch_amalgamated.hpp"
#include "drdn/tensor.hpp"

using namespace drdn;

TEST_CASE("index round trip is bijective") {
    const Tensor4f t(3, 2, 5, 4);
    std::set<long> seen;
    for (int n = 0; n < 3; ++n)
        for (int c = 0; c < 2; ++c)
            for (int h = 0; h < 5; ++h)
                for (int w = 0; w < 4; ++w) {
                    const long i = t.index(n, c, h, w);
                    CHECK(i >= 0);
                    CHECK(i < t.size());
                    seen.insert(i);
                }
    CHECK(static_cast<long>(seen.size()) == t.size());
}

TEST_CASE("elementwise ops") {
    Tensor4f a(1, 1, 1, 3);
    a[0] = -1.0f; a[1] = 0.0f; a[2] = 2.0f;

    const Tensor4f zero = sub(a, a);
    for (long i = 0; i < zero.size(); ++i) CHECK(zero[i] == 0.0f);

    const Tensor4f relu = max_with_zero(a);
    CHECK(relu[0] == 0.0f);
    CHECK(relu[1] == 0.0f);
    CHECK(relu[2] == 2.0f);

    Tensor4f b(1, 1, 1, 3);
    b[0] = 1.0f; b[1] = 2.0f; b[2] = 3.0f;
    const Tensor4f half = scale(b, 0.5f);
    CHECK(half[0] == 0.5f);
    CHECK(half[1] == 1.0f);
    CHECK(half[2] == 1.5f);

    CHECK(add(a, b)[2] == 5.0f);
    CHECK(mul(a, b)[0] == -1.0f);

    const Tensor4f other(1, 1, 3, 1);
    CHECK_THROWS_AS(add(a, other), ShapeMismatch);
}

TEST_CASE("elementwise ops preserve shape") {
    RngState rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Shape4 shape{1 + static_cast<int>(rng.next_u64() % 3),
                           1 + static_cast<int>(rng.next_u64() % 4),
                           1 + static_cast<int>(rng.next_u64() % 6),
                           1 + static_cast<int>(rng.next_u64() % 6)};
        const Tensor4f a = fill_gaussian<float>(shape, 0.0f, 1.0f, rng);
        CHECK(max_with_zero(a).shape() == shape);
        CHECK(scale(a, 2.0f).shape() == shape);
        CHECK(add(a, a).shape() == shape);
    }
}

TEST_CASE("reductions") {
    const Tensor4f ones(1, 1, 2, 2, 1.0f);
    CHECK(reduce_all(Reduce::sum, ones) == 4.0);

    Tensor4f pair(1, 1, 1, 2);
    pair[0] = 2.0f; pair[1] = 4.0f;
    CHECK(reduce_all(Reduce::mean, pair) == 3.0);

    Tensor4f pyth(1, 1, 1, 2);
    pyth[0] = 3.0f; pyth[1] = 4.0f;
    CHECK(reduce_all(Reduce::sum_of_squares, pyth) == 25.0);
}

TEST_CASE("axis reduction collapses the declared axes") {
    RngState rng(11);
    const Tensor4f t = fill_gaussian<float>({2, 3, 4, 5}, 0.0f, 1.0f, rng);

    const Tensor4f channel_sums = reduce(Reduce::sum, t, {true, false, true, true});
    CHECK(channel_sums.shape() == Shape4{1, 3, 1, 1});
    double total = 0.0;
    for (long i = 0; i < channel_sums.size(); ++i) total += channel_sums[i];
    CHECK_THAT(total, Catch::Matchers::WithinAbs(reduce_all(Reduce::sum, t), 1e-3));

    const Tensor4f spatial_mean = reduce(Reduce::mean, t, {false, false, true, true});
    CHECK(spatial_mean.shape() == Shape4{2, 3, 1, 1});
    double manual = 0.0;
    for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 5; ++w) manual += t.at(1, 2, h, w);
    CHECK_THAT(spatial_mean.at(1, 2, 0, 0), Catch::Matchers::WithinAbs(manual / 20.0, 1e-5));
}

TEST_CASE("gaussian fill: zero stddev, determinism") {
    RngState rng(42);
    const Tensor4f constant = fill_gaussian<float>({1, 1, 2, 2}, 3.5f, 0.0f, rng);
    for (long i = 0; i < constant.size(); ++i) CHECK(constant[i] == 3.5f);

    RngState rng_a(99), rng_b(99);
    const Tensor4f a = fill_gaussian<float>({2, 1, 8, 8}, 0.0f, 1.0f, rng_a);
    const Tensor4f b = fill_gaussian<float>({2, 1, 8, 8}, 0.0f, 1.0f, rng_b);
    for (long i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("gaussian fill: sample moments") {
    const float sigma = 25.0f / 255.0f;

    RngState rng(7);
    const Tensor4f big = fill_gaussian<float>({1, 1, 1000, 1000}, 0.0f, sigma, rng);
    const double mean = reduce_all(Reduce::mean, big);
    CHECK(std::abs(mean) < 3.0 * sigma / 1000.0);  // CLT bound at 10^6 samples

    RngState rng2(8);
    const Tensor4f mid = fill_gaussian<float>({1, 1, 400, 250}, 0.0f, sigma, rng2);
    const double var = reduce_all(Reduce::sum_of_squares, mid) / mid.size() -
                       reduce_all(Reduce::mean, mid) * reduce_all(Reduce::mean, mid);
    CHECK(std::abs(var - sigma * sigma) / (sigma * sigma) < 0.05);
}

TEST_CASE("negative stddev is rejected") {
    RngState rng(1);
    CHECK_THROWS_AS(fill_gaussian<float>({1, 1, 1, 1}, 0.0f, -1.0f, rng), NumericalError);
}
