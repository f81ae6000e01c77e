#include <cmath>

#include "catch_amalgamated.hpp"
#include "drdn/network.hpp"
#include "test_support.hpp"

using namespace drdn;
using testutil::finite_diff_check;
using testutil::random_tensor;

TEST_CASE("build produces the block layout") {
    RngState rng(1);

    const auto gray = build<float>(gray_config(), rng);
    CHECK(gray.convs.size() == 10);
    CHECK(gray.bns.size() == 8);  // layers 2..9
    CHECK(gray.convs.front().dilation == 1);
    CHECK(gray.convs.front().padding == 1);
    CHECK(gray.convs[4].dilation == 2);
    CHECK(gray.convs[4].padding == 2);
    CHECK(gray.convs.back().dilation == 1);
    CHECK(gray.convs.back().out_channels() == 1);
    CHECK_FALSE(gray.convs.front().bias.empty());
    CHECK(gray.convs[4].bias.empty());
    CHECK_FALSE(gray.convs.back().bias.empty());

    const auto color = build<float>(color_config(), rng);
    CHECK(color.convs.size() == 12);
    CHECK(color.bns.size() == 10);
    CHECK(color.convs.back().out_channels() == 3);

    const auto minimal = build<float>(NetworkConfig{3, 4, 1, 12}, rng);
    CHECK(minimal.convs.size() == 3);
    CHECK(minimal.bns.size() == 1);

    CHECK_THROWS_AS(build<float>(NetworkConfig{2, 4, 1, 12}, rng), ConfigInvalid);
    CHECK_THROWS_AS(build<float>(NetworkConfig{5, 4, 2, 12}, rng), ConfigInvalid);
}

TEST_CASE("forward_residual preserves shape for gray and color") {
    RngState rng(2);
    auto gray = build<float>(NetworkConfig{5, 8, 1, 40}, rng);
    const Tensor4f y = random_tensor<float>({1, 1, 40, 40}, rng);
    CHECK(forward_residual(gray, y).shape() == Shape4{1, 1, 40, 40});

    auto color = build<float>(NetworkConfig{5, 8, 3, 50}, rng);
    const Tensor4f batch = random_tensor<float>({2, 3, 50, 50}, rng);
    CHECK(forward_residual(color, batch).shape() == Shape4{2, 3, 50, 50});

    // odd sizes too
    const Tensor4f odd = random_tensor<float>({1, 1, 17, 23}, rng);
    CHECK(forward_residual(gray, odd).shape() == Shape4{1, 1, 17, 23});

    CHECK_THROWS_AS(forward_residual(gray, batch), ShapeMismatch);
}

TEST_CASE("zero weights give zero residual and identity denoising") {
    RngState rng(3);
    auto model = build<float>(NetworkConfig{4, 4, 1, 16}, rng);
    for (auto& conv : model.convs) conv.weights.fill(0.0f);
    for (auto& conv : model.convs)
        for (float& b : conv.bias) b = 0.0f;

    const Tensor4f y = clamp01(random_tensor<float>({1, 1, 16, 16}, rng, 0.25f));
    const Tensor4f f = forward_residual(model, y);
    for (long i = 0; i < f.size(); ++i) CHECK(f[i] == 0.0f);
    const Tensor4f restored = denoise(model, y);
    for (long i = 0; i < y.size(); ++i) CHECK(restored[i] == y[i]);
}

TEST_CASE("loss: perfect residual gives exactly zero, zero model gives the closed form") {
    RngState rng(4);
    auto model = build<float>(NetworkConfig{3, 2, 1, 8}, rng);
    for (auto& conv : model.convs) conv.weights.fill(0.0f);

    // Zero-weight model on a flat 2x2 patch (single pixel makes BN
    // degenerate): every element's residual error is 0.2, and the loss is
    // half the per-element mean square, L = 1/2 * 0.2^2.
    const Tensor4f y(1, 1, 2, 2, 0.5f);
    const Tensor4f x(1, 1, 2, 2, 0.3f);
    ModelGrads<float> grads;
    const double loss = loss_and_grads(model, y, x, grads);
    CHECK_THAT(loss, Catch::Matchers::WithinAbs(0.5 * 0.04, 1e-6));

    // perfect residual: y == x and a zero model -> L = 0
    ModelGrads<float> grads2;
    CHECK(loss_and_grads(model, x, x, grads2) == 0.0);
}

TEST_CASE("loss is non-negative on random models") {
    RngState rng(5);
    auto model = build<float>(NetworkConfig{4, 4, 1, 8}, rng);
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor4f y = random_tensor<float>({2, 1, 8, 8}, rng, 0.3f);
        const Tensor4f x = random_tensor<float>({2, 1, 8, 8}, rng, 0.3f);
        ModelGrads<float> grads;
        CHECK(loss_and_grads(model, y, x, grads) >= 0.0);
    }
}

TEST_CASE("whole-network gradients match finite differences (D=4, W=4, 8x8)") {
    RngState rng(6);
    auto model = build<double>(NetworkConfig{4, 4, 1, 8}, rng);
    const Tensor4<double> y = random_tensor<double>({2, 1, 8, 8}, rng, 0.3);
    const Tensor4<double> x = random_tensor<double>({2, 1, 8, 8}, rng, 0.3);

    ModelGrads<double> grads;
    auto model_for_grads = model;  // keep a pristine copy for the oracle
    (void)loss_and_grads(model_for_grads, y, x, grads);

    const auto loss = [&] {
        auto scratch = model;
        ModelGrads<double> unused;
        return loss_and_grads(scratch, y, x, unused);
    };

    const std::vector<ParamView<double>> params = param_views(model);
    std::vector<ParamView<double>> grad_refs = grad_views(model, grads);
    REQUIRE(params.size() == grad_refs.size());
    for (size_t i = 0; i < params.size(); ++i) {
        const auto result = finite_diff_check(params[i].data, grad_refs[i].data,
                                              params[i].count, loss, 1e-5);
        INFO("parameter view " << i);
        CHECK(result.max_rel_err < 1e-3);
    }
}

TEST_CASE("param_count matches the published magnitudes and pinned exact values") {
    const long gray = param_count(gray_config());
    const long color = param_count(color_config());

    // regression constants, derived once from the closed-form sum
    CHECK(gray == 297153);
    CHECK(color == 373443);

    CHECK(gray >= 285000);
    CHECK(gray <= 315000);
    CHECK(color >= 361000);
    CHECK(color <= 399000);

    // hand count for a tiny config: D=3, W=1, C=1
    //   conv1 9+1, conv2 9, bn 2, conv3 9+1
    CHECK(param_count(NetworkConfig{3, 1, 1, 12}) == 31);
}

TEST_CASE("depth-selection rule holds for the preset configs") {
    CHECK(gray_config().final_receptive_field() == 37);
    CHECK(gray_config().depth_rule_ok());
    CHECK(color_config().final_receptive_field() == 45);
    CHECK(color_config().depth_rule_ok());

    // depth 11 reaches field 41, still under 42; depth 12 reaches 45
    CHECK(NetworkConfig{11, 64, 1, 40}.depth_rule_ok());
    CHECK_FALSE(NetworkConfig{12, 64, 1, 40}.depth_rule_ok());
}

TEST_CASE("dump_feature_map: ties, normalization, bounds") {
    RngState rng(7);
    auto model = build<float>(NetworkConfig{4, 4, 1, 8}, rng);
    const Tensor4f y = random_tensor<float>({1, 1, 8, 8}, rng, 0.3f);

    const Tensor4f map = dump_feature_map(model, y, 2);
    CHECK(map.shape() == Shape4{1, 1, 8, 8});
    float lo = 1.0f, hi = 0.0f;
    for (long i = 0; i < map.size(); ++i) {
        lo = std::min(lo, map[i]);
        hi = std::max(hi, map[i]);
    }
    CHECK(lo >= 0.0f);
    CHECK(hi <= 1.0f);

    // zero-weight model: all channels tie at zero -> constant map
    auto zero = model;
    for (auto& conv : zero.convs) conv.weights.fill(0.0f);
    for (auto& conv : zero.convs)
        for (float& b : conv.bias) b = 0.0f;
    const Tensor4f flat = dump_feature_map(zero, y, 2);
    for (long i = 0; i < flat.size(); ++i) CHECK(flat[i] == 0.5f);

    CHECK_THROWS_AS(dump_feature_map(model, y, 0), IndexOutOfRange);
    CHECK_THROWS_AS(dump_feature_map(model, y, 99), IndexOutOfRange);
}
