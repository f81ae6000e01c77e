#pragma once

// Training data pipeline: patch extraction, Gaussian noise injection (fixed
// sigma or blind range), PSNR, and model evaluation over an image set.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "drdn/image_io.hpp"
#include "drdn/network.hpp"
#include "drdn/tensor.hpp"

namespace drdn {

// Noise standard deviations are quoted on the 0-255 intensity scale; pixels
// live in [0,1], so the applied stddev is sigma/255.
struct NoiseSpec {
    enum class Mode { fixed, blind };
    Mode mode = Mode::fixed;
    double sigma = 25.0;       // fixed mode
    double sigma_lo = 0.0;     // blind mode
    double sigma_hi = 55.0;

    void validate() const {
        if (mode == Mode::fixed) {
            if (sigma < 0.0) throw ConfigInvalid("sigma must be >= 0");
        } else {
            if (sigma_lo < 0.0 || sigma_lo >= sigma_hi)
                throw ConfigInvalid("blind range requires 0 <= lo < hi");
        }
    }

    static NoiseSpec fixed(double sigma) { return {Mode::fixed, sigma, 0.0, 0.0}; }
    static NoiseSpec blind(double lo, double hi) { return {Mode::blind, 0.0, lo, hi}; }
};

// Draws the sigma for one patch/image (fixed mode just returns sigma).
inline double draw_sigma(const NoiseSpec& spec, RngState& rng) {
    spec.validate();
    return spec.mode == NoiseSpec::Mode::fixed ? spec.sigma
                                               : rng.next_uniform(spec.sigma_lo, spec.sigma_hi);
}

struct NoisyResult {
    Tensor4<float> noisy;  // clean + n, n ~ N(0, (sigma/255)^2), not clamped
    double sigma;          // the sigma actually applied (0-255 scale)
};

inline NoisyResult add_noise(const Tensor4<float>& clean, const NoiseSpec& spec, RngState& rng) {
    const double sigma = draw_sigma(spec, rng);
    const float stddev = static_cast<float>(sigma / 255.0);
    Tensor4<float> noisy(clean.shape());
    for (long i = 0; i < clean.size(); ++i)
        noisy[i] = clean[i] + stddev * static_cast<float>(rng.next_normal());
    return {std::move(noisy), sigma};
}

// Noisy/clean training pairs; patch i was corrupted with sigmas[i].
struct PatchDataset {
    std::vector<Tensor4<float>> clean;  // each (1, C, patch, patch)
    std::vector<Tensor4<float>> noisy;
    std::vector<double> sigmas;
    int patch_size = 0;

    int count() const { return static_cast<int>(clean.size()); }
};

// Uniform random crops: source image and top-left corner drawn uniformly.
inline std::vector<Tensor4<float>> extract_patches(const std::vector<Image>& images,
                                                   int patch_size, int count, RngState& rng) {
    if (images.empty()) throw ConfigInvalid("no source images");
    for (const Image& image : images)
        if (image.height < patch_size || image.width < patch_size)
            throw ImageTooSmall(std::to_string(image.width) + "x" + std::to_string(image.height) +
                                " cannot hold a " + std::to_string(patch_size) + " patch");
    std::vector<Tensor4<float>> patches;
    patches.reserve(count);
    for (int i = 0; i < count; ++i) {
        const Image& image =
            images[static_cast<size_t>(rng.next_u64() % images.size())];
        const int max_y = image.height - patch_size;
        const int max_x = image.width - patch_size;
        const int top = max_y == 0 ? 0 : static_cast<int>(rng.next_u64() % (max_y + 1));
        const int left = max_x == 0 ? 0 : static_cast<int>(rng.next_u64() % (max_x + 1));
        Tensor4<float> patch(1, image.channels, patch_size, patch_size);
        for (int c = 0; c < image.channels; ++c)
            for (int y = 0; y < patch_size; ++y)
                for (int x = 0; x < patch_size; ++x)
                    patch.at(0, c, y, x) = image.at(c, top + y, left + x);
        patches.push_back(std::move(patch));
    }
    return patches;
}

inline PatchDataset make_dataset(std::vector<Tensor4<float>> clean_patches,
                                 const NoiseSpec& spec, RngState& rng) {
    PatchDataset dataset;
    dataset.patch_size = clean_patches.empty() ? 0 : clean_patches.front().shape().h;
    for (Tensor4<float>& clean : clean_patches) {
        NoisyResult result = add_noise(clean, spec, rng);
        dataset.noisy.push_back(std::move(result.noisy));
        dataset.sigmas.push_back(result.sigma);
        dataset.clean.push_back(std::move(clean));
    }
    return dataset;
}

// PSNR in dB over [0,1] floats, all channels jointly; identical images are
// reported as the 100 dB cap.
inline double psnr(const Tensor4<float>& reference, const Tensor4<float>& test) {
    detail::require_same_shape(reference.shape(), test.shape());
    double sum_sq = 0.0;
    for (long i = 0; i < reference.size(); ++i) {
        const double d = static_cast<double>(reference[i]) - test[i];
        sum_sq += d * d;
    }
    const double mse = sum_sq / static_cast<double>(reference.size());
    if (mse <= 0.0) return 100.0;
    const double value = 10.0 * std::log10(1.0 / mse);
    return value > 100.0 ? 100.0 : value;
}

inline double psnr(const Image& reference, const Image& test) {
    return psnr(to_tensor(reference), to_tensor(test));
}

// ---- evaluation ---------------------------------------------------------------

struct EvalRow {
    std::string name;
    double sigma;
    double noisy_psnr;
    double denoised_psnr;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_sigma = 0.0;
    double mean_noisy_psnr = 0.0;
    double mean_denoised_psnr = 0.0;
};

// Corrupts each image per `spec`, denoises it, and scores both against the
// clean original.
inline EvalReport evaluate(const DenoiserModel<float>& model, const std::vector<Image>& images,
                           const std::vector<std::string>& names, const NoiseSpec& spec,
                           RngState& rng) {
    EvalReport report;
    for (size_t i = 0; i < images.size(); ++i) {
        const Tensor4<float> clean = to_tensor(images[i]);
        if (clean.shape().c != model.config.io_channels)
            throw ShapeMismatch("model expects " + std::to_string(model.config.io_channels) +
                                " channels, image '" + names[i] + "' has " +
                                std::to_string(clean.shape().c));
        const NoisyResult corrupted = add_noise(clean, spec, rng);
        const Tensor4<float> restored = denoise(model, corrupted.noisy);
        EvalRow row{names[i], corrupted.sigma, psnr(clean, corrupted.noisy),
                    psnr(clean, restored)};
        report.mean_sigma += row.sigma;
        report.mean_noisy_psnr += row.noisy_psnr;
        report.mean_denoised_psnr += row.denoised_psnr;
        report.rows.push_back(std::move(row));
    }
    if (!report.rows.empty()) {
        const double n = static_cast<double>(report.rows.size());
        report.mean_sigma /= n;
        report.mean_noisy_psnr /= n;
        report.mean_denoised_psnr /= n;
    }
    return report;
}

// One line per image `name<TAB>sigma<TAB>noisy_psnr<TAB>denoised_psnr`,
// final line MEAN.
inline std::string format_report(const EvalReport& report) {
    auto fmt = [](double v) {
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), "%.4f", v);
        return std::string(buffer);
    };
    std::string out;
    for (const EvalRow& row : report.rows)
        out += row.name + "\t" + fmt(row.sigma) + "\t" + fmt(row.noisy_psnr) + "\t" +
               fmt(row.denoised_psnr) + "\n";
    out += "MEAN\t" + fmt(report.mean_sigma) + "\t" + fmt(report.mean_noisy_psnr) + "\t" +
           fmt(report.mean_denoised_psnr) + "\n";
    return out;
}

// ---- dataset directories --------------------------------------------------------

// Sorted *.pgm / *.ppm paths directly under `dir`.
inline std::vector<std::string> list_pnm_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

inline std::vector<Image> load_images(const std::vector<std::string>& paths) {
    std::vector<Image> images;
    images.reserve(paths.size());
    for (const std::string& path : paths) images.push_back(load_image(path));
    return images;
}

}  // namespace drdn
