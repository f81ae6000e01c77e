// Command-line front end: receptive-field tables, parameter counts, training,
// denoising, evaluation, and feature-map dumps.
//
// Exit codes: 0 success, 1 usage error, 2 runtime/data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "drdn/checkpoint.hpp"
#include "drdn/conv_arith.hpp"
#include "drdn/data.hpp"
#include "drdn/image_io.hpp"
#include "drdn/network.hpp"
#include "drdn/optimizer.hpp"

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

drdn::LayerStackSpec preset_stack(const std::string& name) {
    drdn::LayerStackSpec stack;
    auto plain = [] { return drdn::LayerSpec{3, 1, 1, 1}; };
    auto dilated = [] { return drdn::LayerSpec{3, 2, 1, 2}; };
    if (name == "gray10" || name == "color12") {
        const int depth = name == "gray10" ? 10 : 12;
        stack.input_size = name == "gray10" ? 40 : 50;
        stack.layers.push_back(plain());
        for (int l = 2; l < depth; ++l) stack.layers.push_back(dilated());
        stack.layers.push_back(plain());
    } else if (name == "dncnn17" || name == "dncnn20") {
        const int depth = name == "dncnn17" ? 17 : 20;
        stack.input_size = name == "dncnn17" ? 40 : 50;
        for (int l = 0; l < depth; ++l) stack.layers.push_back(plain());
    } else {
        throw UsageError("unknown preset '" + name + "'");
    }
    return stack;
}

drdn::NoiseSpec noise_from_flags(const std::optional<double>& sigma,
                                 const std::string& blind) {
    if (sigma.has_value() == !blind.empty())
        throw UsageError("exactly one of --sigma and --blind is required");
    if (sigma) return drdn::NoiseSpec::fixed(*sigma);
    const size_t colon = blind.find(':');
    if (colon == std::string::npos) throw UsageError("--blind expects lo:hi");
    try {
        const double lo = std::stod(blind.substr(0, colon));
        const double hi = std::stod(blind.substr(colon + 1));
        return drdn::NoiseSpec::blind(lo, hi);
    } catch (const std::logic_error&) {
        throw UsageError("--blind expects numeric lo:hi");
    }
}

int run_rf_table(const std::string& preset, const std::string& stack_text, int input_size) {
    if (preset.empty() == stack_text.empty())
        throw UsageError("exactly one of --preset and --stack is required");
    drdn::LayerStackSpec stack;
    if (!preset.empty()) {
        stack = preset_stack(preset);
    } else {
        stack.layers = drdn::parse_stack(stack_text);
        stack.input_size = 40;
    }
    if (input_size > 0) stack.input_size = input_size;
    const drdn::RfTable table = drdn::receptive_field(stack);
    std::printf("layer\tdilation\trf\tout\n");
    for (const drdn::RfRow& row : table.per_layer)
        std::printf("%d\t%d\t%ld\t%d\n", row.layer_index, row.dilation, row.receptive_field,
                    row.output_size);
    return 0;
}

int run_param_count(const std::string& preset, int depth, int width, int channels) {
    drdn::NetworkConfig config;
    if (!preset.empty()) {
        if (preset == "gray")
            config = drdn::gray_config();
        else if (preset == "color")
            config = drdn::color_config();
        else
            throw UsageError("unknown preset '" + preset + "' (gray|color)");
    } else {
        if (depth <= 0 || width <= 0 || channels <= 0)
            throw UsageError("--preset or all of --depth/--width/--channels required");
        config = {depth, width, channels, channels == 1 ? 40 : 50};
    }
    std::printf("%ld\n", drdn::param_count(config));
    return 0;
}

struct TrainFlags {
    std::string data_dir;
    std::optional<double> sigma;
    std::string blind;
    int depth = 10;
    int width = 64;
    int channels = 1;
    int epochs = 40;
    int batch = 128;
    int patch_size = 0;   // 0: 40 for gray, 50 for color
    int patch_count = 0;     // 0: preset counts (128*1600 gray, 128*3000 color)
    int lr_drop_epoch = -1;  // -1: 3/4 of total epochs
    double lr = 0.001;
    double lr_reduced = 0.0001;
    std::uint64_t seed = 0;
    std::string out;
    std::string trace_path;
    int checkpoint_every = 0;  // epochs; 0 = final only
};

int run_train(const TrainFlags& flags) {
    const drdn::NoiseSpec spec = noise_from_flags(flags.sigma, flags.blind);
    const int patch_size =
        flags.patch_size > 0 ? flags.patch_size : (flags.channels == 1 ? 40 : 50);
    const int patch_count =
        flags.patch_count > 0 ? flags.patch_count
                              : (flags.channels == 1 ? 128 * 1600 : 128 * 3000);

    drdn::NetworkConfig net_config{flags.depth, flags.width, flags.channels, patch_size};
    net_config.validate();
    if (!net_config.depth_rule_ok())
        std::fprintf(stderr,
                     "warning: receptive field %ld reaches the %d-pixel patch; "
                     "consider fewer layers\n",
                     net_config.final_receptive_field(), patch_size);

    drdn::TrainingConfig train_config;
    train_config.batch_size = flags.batch;
    train_config.total_epochs = flags.epochs;
    train_config.lr_initial = flags.lr;
    train_config.lr_reduced = flags.lr_reduced;
    train_config.lr_drop_epoch =
        flags.lr_drop_epoch >= 0 ? flags.lr_drop_epoch : std::max(1, flags.epochs * 3 / 4);
    train_config.seed = flags.seed;
    train_config.validate();

    const auto paths = drdn::list_pnm_files(flags.data_dir + "/train");
    if (paths.empty()) throw drdn::IoError("no .pgm/.ppm files in " + flags.data_dir + "/train");
    std::fprintf(stderr, "loading %zu training images\n", paths.size());
    const std::vector<drdn::Image> images = drdn::load_images(paths);

    drdn::RngState patch_rng(flags.seed + 1);
    drdn::RngState noise_rng(flags.seed + 2);
    drdn::RngState init_rng(flags.seed);
    std::fprintf(stderr, "extracting %d patches of %dx%d\n", patch_count, patch_size, patch_size);
    const drdn::PatchDataset dataset = drdn::make_dataset(
        drdn::extract_patches(images, patch_size, patch_count, patch_rng), spec, noise_rng);

    drdn::DenoiserModelF model = drdn::build<float>(net_config, init_rng);
    const std::string trace_path =
        flags.trace_path.empty() ? flags.out + ".trace" : flags.trace_path;

    std::vector<drdn::EpochStat> trace = drdn::train(
        model, dataset, train_config,
        [&](const drdn::EpochStat& stat, const drdn::DenoiserModelF& snapshot) {
            std::fprintf(stderr, "epoch %d/%d  loss %.6f  lr %g\n", stat.epoch + 1,
                         train_config.total_epochs, stat.mean_loss, stat.lr);
            if (flags.checkpoint_every > 0 && (stat.epoch + 1) % flags.checkpoint_every == 0)
                drdn::save_checkpoint(snapshot, flags.out);
        });

    drdn::save_checkpoint(model, flags.out);
    std::ofstream trace_file(trace_path);
    if (!trace_file) throw drdn::IoError("cannot write trace to '" + trace_path + "'");
    trace_file << drdn::format_trace(trace);
    std::fprintf(stderr, "wrote %s and %s\n", flags.out.c_str(), trace_path.c_str());
    return 0;
}

int run_denoise(const std::string& model_path, const std::string& in_path,
                const std::string& out_path) {
    const drdn::DenoiserModelF model = drdn::load_checkpoint(model_path);
    const drdn::Image input = drdn::load_image(in_path);
    const drdn::Tensor4f restored = drdn::denoise(model, drdn::to_tensor(input));
    drdn::save_image(drdn::from_tensor(restored), out_path);
    return 0;
}

int run_eval(const std::string& model_path, const std::string& data_dir,
             const std::optional<double>& sigma, const std::string& blind,
             std::uint64_t seed) {
    const drdn::NoiseSpec spec = noise_from_flags(sigma, blind);
    const drdn::DenoiserModelF model = drdn::load_checkpoint(model_path);
    const auto paths = drdn::list_pnm_files(data_dir + "/test");
    if (paths.empty()) throw drdn::IoError("no .pgm/.ppm files in " + data_dir + "/test");
    std::vector<std::string> names;
    for (const std::string& path : paths)
        names.push_back(std::filesystem::path(path).filename().string());
    drdn::RngState rng(seed);
    const drdn::EvalReport report =
        drdn::evaluate(model, drdn::load_images(paths), names, spec, rng);
    std::fputs(drdn::format_report(report).c_str(), stdout);
    return 0;
}

int run_dump_features(const std::string& model_path, const std::string& in_path, int layer,
                      const std::string& out_path) {
    const drdn::DenoiserModelF model = drdn::load_checkpoint(model_path);
    const drdn::Image input = drdn::load_image(in_path);
    const drdn::Tensor4f map = drdn::dump_feature_map(model, drdn::to_tensor(input), layer);
    drdn::save_image(drdn::from_tensor(map), out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drdn: dilated residual denoiser for additive Gaussian white noise"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file of key = value lines; flags override it");

    // rf-table
    auto* rf = app.add_subcommand("rf-table", "Per-layer receptive field and output sizes");
    std::string rf_preset, rf_stack;
    int rf_input = 0;
    rf->add_option("--preset", rf_preset, "gray10|color12|dncnn17|dncnn20");
    rf->add_option("--stack", rf_stack, "Comma-separated per-layer k:p:s:d list");
    rf->add_option("--input-size", rf_input, "Input size in pixels (default: preset's patch)");

    // param-count
    auto* pc = app.add_subcommand("param-count", "Learnable parameter count");
    std::string pc_preset;
    int pc_depth = 0, pc_width = 0, pc_channels = 0;
    pc->add_option("--preset", pc_preset, "gray|color");
    pc->add_option("--depth", pc_depth, "Layer count D");
    pc->add_option("--width", pc_width, "Hidden feature channels W");
    pc->add_option("--channels", pc_channels, "Image channels (1 or 3)");

    // train
    auto* tr = app.add_subcommand("train", "Train a denoiser and write a checkpoint");
    TrainFlags tf;
    double tr_sigma = -1.0;
    auto* tr_sigma_opt =
        tr->add_option("--sigma", tr_sigma, "Fixed noise stddev on the 0-255 scale");
    auto* tr_blind_opt = tr->add_option("--blind", tf.blind, "Blind noise range lo:hi");
    tr_sigma_opt->excludes(tr_blind_opt);
    tr->add_option("--data", tf.data_dir, "Dataset root containing train/")->required();
    tr->add_option("--depth", tf.depth, "Layer count D")->capture_default_str();
    tr->add_option("--width", tf.width, "Hidden feature channels W")->capture_default_str();
    tr->add_option("--channels", tf.channels, "1 gray, 3 color")->capture_default_str();
    tr->add_option("--epochs", tf.epochs, "Training epochs")->capture_default_str();
    tr->add_option("--batch", tf.batch, "Mini-batch size")->capture_default_str();
    tr->add_option("--patch-size", tf.patch_size, "Patch side (default 40 gray / 50 color)");
    tr->add_option("--patch-count", tf.patch_count,
                   "Patches to extract (default 128*1600 gray / 128*3000 color)");
    tr->add_option("--lr", tf.lr, "Initial learning rate")->capture_default_str();
    tr->add_option("--lr-reduced", tf.lr_reduced, "Learning rate after the drop")
        ->capture_default_str();
    tr->add_option("--lr-drop-epoch", tf.lr_drop_epoch,
                   "Epoch of the learning-rate drop (default: 3/4 of epochs)");
    tr->add_option("--seed", tf.seed, "RNG seed")->capture_default_str();
    tr->add_option("--out", tf.out, "Checkpoint output path")->required();
    tr->add_option("--trace", tf.trace_path, "Loss trace path (default <out>.trace)");
    tr->add_option("--checkpoint-every", tf.checkpoint_every,
                   "Also write the checkpoint every N epochs");

    // denoise
    auto* dn = app.add_subcommand("denoise", "Denoise one image with a trained checkpoint");
    std::string dn_model, dn_in, dn_out;
    dn->add_option("--model", dn_model, "Checkpoint path")->required();
    dn->add_option("--in", dn_in, "Noisy input image (PGM/PPM)")->required();
    dn->add_option("--out", dn_out, "Denoised output image")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "PSNR report over a test directory");
    std::string ev_model, ev_data, ev_blind;
    double ev_sigma = -1.0;
    std::uint64_t ev_seed = 0;
    ev->add_option("--model", ev_model, "Checkpoint path")->required();
    ev->add_option("--data", ev_data, "Dataset root containing test/")->required();
    auto* ev_sigma_opt = ev->add_option("--sigma", ev_sigma, "Fixed noise stddev (0-255 scale)");
    auto* ev_blind_opt = ev->add_option("--blind", ev_blind, "Blind noise range lo:hi");
    ev_sigma_opt->excludes(ev_blind_opt);
    ev->add_option("--seed", ev_seed, "Noise seed")->capture_default_str();

    // dump-features
    auto* df = app.add_subcommand("dump-features", "Highest-activation feature map as PGM");
    std::string df_model, df_in, df_out;
    int df_layer = 0;
    df->add_option("--model", df_model, "Checkpoint path")->required();
    df->add_option("--in", df_in, "Input image")->required();
    df->add_option("--layer", df_layer, "Layer index (1-based)")->required();
    df->add_option("--out", df_out, "Output PGM path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (rf->parsed()) return run_rf_table(rf_preset, rf_stack, rf_input);
        if (pc->parsed()) return run_param_count(pc_preset, pc_depth, pc_width, pc_channels);
        if (tr->parsed()) {
            if (tr_sigma_opt->count()) tf.sigma = tr_sigma;
            return run_train(tf);
        }
        if (dn->parsed()) return run_denoise(dn_model, dn_in, dn_out);
        if (ev->parsed()) {
            std::optional<double> sigma;
            if (ev_sigma_opt->count()) sigma = ev_sigma;
            return run_eval(ev_model, ev_data, sigma, ev_blind, ev_seed);
        }
        if (df->parsed()) return run_dump_features(df_model, df_in, df_layer, df_out);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const drdn::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
