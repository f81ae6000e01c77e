#include <cmath>
#include <filesystem>
#include <fstream>

#include "catch_amalgamated.hpp"
#include "drdn/data.hpp"
#include "test_support.hpp"

using namespace drdn;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream file(path, std::ios::binary);
    file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("P5 load maps 8-bit values to v/255") {
    const std::string path = temp_path("drdn_p5.pgm");
    write_bytes(path, std::string("P5\n2 2\n255\n") + '\x00' + '\xff' + '\x80' + '\x40');
    const Image image = load_image(path);
    CHECK(image.channels == 1);
    CHECK(image.width == 2);
    CHECK(image.height == 2);
    CHECK(image.at(0, 0, 0) == 0.0f);
    CHECK(image.at(0, 0, 1) == 1.0f);
    CHECK(image.at(0, 1, 0) == 128.0f / 255.0f);
    CHECK(image.at(0, 1, 1) == 64.0f / 255.0f);
    std::filesystem::remove(path);
}

TEST_CASE("ASCII P2 with comments parses like binary") {
    const std::string path = temp_path("drdn_p2.pgm");
    write_bytes(path, "P2\n# a comment\n2 1\n255\n0 255\n");
    const Image image = load_image(path);
    CHECK(image.at(0, 0, 0) == 0.0f);
    CHECK(image.at(0, 0, 1) == 1.0f);
    std::filesystem::remove(path);
}

TEST_CASE("format errors carry a byte offset") {
    const std::string path = temp_path("drdn_bad.pgm");

    write_bytes(path, "P6\n2 2\n65535\n");
    CHECK_THROWS_AS(load_image(path), FormatError);

    write_bytes(path, "P7\n2 2\n255\n");
    CHECK_THROWS_AS(load_image(path), FormatError);

    write_bytes(path, "P5\n2 2\n255\nXY");  // raster too short
    try {
        load_image(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset > 0);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_image("/nonexistent.pgm"), IoError);
}

TEST_CASE("save/load round trip is bit-exact for fuzzed 8-bit images") {
    RngState rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const int channels = (rng.next_u64() % 2) ? 3 : 1;
        const int height = 1 + static_cast<int>(rng.next_u64() % 20);
        const int width = 1 + static_cast<int>(rng.next_u64() % 20);
        Image image{channels, height, width, {}};
        image.pixels.resize(static_cast<size_t>(channels) * height * width);
        for (float& p : image.pixels)
            p = static_cast<float>(rng.next_u64() % 256) / 255.0f;

        const std::string path = temp_path(channels == 1 ? "drdn_rt.pgm" : "drdn_rt.ppm");
        save_image(image, path);
        const Image loaded = load_image(path);
        REQUIRE(loaded.pixels.size() == image.pixels.size());
        for (size_t i = 0; i < image.pixels.size(); ++i)
            CHECK(loaded.pixels[i] == image.pixels[i]);
        std::filesystem::remove(path);
    }
}

TEST_CASE("patch extraction") {
    RngState rng(32);
    const Image whole = testutil::synthetic_image(1, 40, 40, 1);
    const auto patches = extract_patches({whole}, 40, 5, rng);
    REQUIRE(patches.size() == 5);
    const Tensor4f reference = to_tensor(whole);
    for (const Tensor4f& patch : patches)
        for (long i = 0; i < patch.size(); ++i) CHECK(patch[i] == reference[i]);

    CHECK_THROWS_AS(extract_patches({whole}, 41, 1, rng), ImageTooSmall);
}

TEST_CASE("patch extraction stays in bounds for fuzzed image sizes") {
    RngState rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const int patch = 4 + static_cast<int>(rng.next_u64() % 8);
        std::vector<Image> images;
        for (int i = 0; i < 3; ++i)
            images.push_back(testutil::synthetic_image(
                1, patch + static_cast<int>(rng.next_u64() % 10),
                patch + static_cast<int>(rng.next_u64() % 10), i));
        const auto patches = extract_patches(images, patch, 50, rng);
        CHECK(patches.size() == 50);
        for (const Tensor4f& p : patches) {
            CHECK(p.shape() == Shape4{1, 1, patch, patch});
            for (long i = 0; i < p.size(); ++i) {
                CHECK(p[i] >= 0.0f);
                CHECK(p[i] <= 1.0f);
            }
        }
    }
}

TEST_CASE("add_noise: sigma 0 is exact, fixed sigma has the right spread") {
    RngState rng(34);
    const Tensor4f clean(1, 1, 16, 16, 0.5f);
    const NoisyResult silent = add_noise(clean, NoiseSpec::fixed(0.0), rng);
    for (long i = 0; i < clean.size(); ++i) CHECK(silent.noisy[i] == clean[i]);
    CHECK(silent.sigma == 0.0);

    const Tensor4f large(1, 1, 256, 256, 0.5f);
    const NoisyResult noisy = add_noise(large, NoiseSpec::fixed(25.0), rng);
    const Tensor4f noise = sub(noisy.noisy, large);
    const double mean = reduce_all(Reduce::mean, noise);
    const double var = reduce_all(Reduce::sum_of_squares, noise) / noise.size() - mean * mean;
    const double target = 25.0 / 255.0;
    CHECK(std::abs(std::sqrt(var) - target) / target < 0.05);
}

TEST_CASE("add_noise is reproducible bit-for-bit with the same seed") {
    const Tensor4f clean(1, 1, 8, 8, 0.5f);
    RngState rng_a(35), rng_b(35);
    const NoisyResult a = add_noise(clean, NoiseSpec::fixed(25.0), rng_a);
    const NoisyResult b = add_noise(clean, NoiseSpec::fixed(25.0), rng_b);
    for (long i = 0; i < clean.size(); ++i) CHECK(a.noisy[i] == b.noisy[i]);
}

TEST_CASE("blind mode draws sigma uniformly from the range") {
    RngState rng(36);
    const NoiseSpec spec = NoiseSpec::blind(0.0, 55.0);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double sigma = draw_sigma(spec, rng);
        CHECK(sigma >= 0.0);
        CHECK(sigma < 55.0);
        sum += sigma;
    }
    CHECK(std::abs(sum / 10000.0 - 27.5) < 55.0 * 0.02);

    CHECK_THROWS_AS(NoiseSpec::blind(10.0, 5.0).validate(), ConfigInvalid);
    CHECK_THROWS_AS(NoiseSpec::fixed(-1.0).validate(), ConfigInvalid);
}

TEST_CASE("psnr oracle values") {
    // identical images -> declared 100 dB cap
    const Tensor4f a(1, 1, 8, 8, 0.25f);
    CHECK(psnr(a, a) == 100.0);

    // uniform 1/255 error -> 20*log10(255)
    Tensor4f b = a;
    for (long i = 0; i < b.size(); ++i) b[i] += 1.0f / 255.0f;
    CHECK_THAT(psnr(a, b), Catch::Matchers::WithinAbs(20.0 * std::log10(255.0), 0.01));

    // sigma=25 AWGN on a constant image: E[PSNR] = 20*log10(255/25)
    RngState rng(37);
    const Tensor4f big(1, 1, 512, 512, 0.5f);
    const NoisyResult noisy = add_noise(big, NoiseSpec::fixed(25.0), rng);
    CHECK_THAT(psnr(big, noisy.noisy),
               Catch::Matchers::WithinAbs(20.0 * std::log10(255.0 / 25.0), 0.2));

    // symmetry
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK_THROWS_AS(psnr(a, Tensor4f(1, 1, 4, 4)), ShapeMismatch);
}

TEST_CASE("evaluate: zero-weight model reports the noisy baseline") {
    RngState rng(38);
    auto model = build<float>(NetworkConfig{3, 2, 1, 8}, rng);
    for (auto& conv : model.convs) conv.weights.fill(0.0f);
    for (auto& conv : model.convs)
        for (float& b : conv.bias) b = 0.0f;

    const std::vector<Image> images{testutil::synthetic_image(1, 24, 24, 0),
                                    testutil::synthetic_image(1, 24, 24, 1)};
    RngState eval_rng(39);
    const EvalReport report =
        evaluate(model, images, {"a.pgm", "b.pgm"}, NoiseSpec::fixed(25.0), eval_rng);
    REQUIRE(report.rows.size() == 2);
    for (const EvalRow& row : report.rows) {
        // denoise clamps to [0,1]; the unclamped noisy baseline can only be
        // equal or slightly worse
        CHECK(row.denoised_psnr >= row.noisy_psnr - 1e-9);
        CHECK(row.sigma == 25.0);
    }

    const std::string text = format_report(report);
    CHECK(text.find("a.pgm\t25.0000\t") == 0);
    CHECK(text.find("MEAN\t") != std::string::npos);
}
