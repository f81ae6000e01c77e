#pragma once

// SGD with momentum, weight decay on the convolution filters, and a two-level
// learning-rate schedule, plus the epoch training loop.

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "drdn/data.hpp"
#include "drdn/network.hpp"

namespace drdn {

struct TrainingConfig {
    double momentum = 0.9;
    int batch_size = 128;
    double lr_initial = 0.001;
    double lr_reduced = 0.0001;
    int lr_drop_epoch = 30;
    int total_epochs = 40;
    double weight_decay = 0.0001;
    std::uint64_t seed = 0;

    void validate() const {
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigInvalid("momentum must be in [0,1)");
        if (batch_size < 1) throw ConfigInvalid("batch_size must be >= 1");
        if (lr_reduced >= lr_initial) throw ConfigInvalid("lr_reduced must be < lr_initial");
        if (lr_drop_epoch >= total_epochs)
            throw ConfigInvalid("lr_drop_epoch must be < total_epochs");
    }
};

// Step schedule: lr_initial until lr_drop_epoch, lr_reduced afterwards.
inline double lr_at(const TrainingConfig& config, int epoch) {
    if (epoch < 0 || epoch >= config.total_epochs)
        throw EpochOutOfRange(std::to_string(epoch) + " of " +
                              std::to_string(config.total_epochs));
    return epoch < config.lr_drop_epoch ? config.lr_initial : config.lr_reduced;
}

template <typename T>
struct OptimizerState {
    std::vector<std::vector<T>> velocity;  // one buffer per parameter view
    long step_count = 0;
    int epoch = 0;

    static OptimizerState init(DenoiserModel<T>& model) {
        OptimizerState state;
        for (const ParamView<T>& view : param_views(model))
            state.velocity.emplace_back(view.count, T(0));
        return state;
    }
};

// v <- momentum*v - lr*(g + weight_decay*theta); theta <- theta + v.
// Decay applies only to views flagged for it (conv filters).
template <typename T>
void step(DenoiserModel<T>& model, ModelGrads<T>& grads, OptimizerState<T>& state,
          const TrainingConfig& config, double lr) {
    std::vector<ParamView<T>> params = param_views(model);
    std::vector<ParamView<T>> gradients = grad_views(model, grads);
    if (params.size() != state.velocity.size())
        throw ShapeMismatch("optimizer state does not match model parameters");
    const T m = static_cast<T>(config.momentum);
    const T rate = static_cast<T>(lr);
    for (size_t i = 0; i < params.size(); ++i) {
        ParamView<T>& p = params[i];
        const ParamView<T>& g = gradients[i];
        std::vector<T>& v = state.velocity[i];
        if (g.count != p.count || static_cast<long>(v.size()) != p.count)
            throw ShapeMismatch("gradient/velocity size mismatch");
        const T decay = p.decay ? static_cast<T>(config.weight_decay) : T(0);
        for (long j = 0; j < p.count; ++j) {
            v[j] = m * v[j] - rate * (g.data[j] + decay * p.data[j]);
            p.data[j] += v[j];
        }
    }
    ++state.step_count;
}

// Full mini-batches over a shuffled index set; the remainder is dropped.
inline std::vector<std::vector<int>> make_batches(int count, int batch_size, RngState& rng) {
    const std::vector<int> order = rng.permutation(count);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start + batch_size <= count; start += batch_size)
        batches.emplace_back(order.begin() + start, order.begin() + start + batch_size);
    return batches;
}

struct EpochStat {
    int epoch;
    double mean_loss;
    double lr;
};

inline std::string format_trace(const std::vector<EpochStat>& trace) {
    std::string out;
    for (const EpochStat& stat : trace) {
        char line[96];
        std::snprintf(line, sizeof(line), "%d\t%.8f\t%g\n", stat.epoch, stat.mean_loss, stat.lr);
        out += line;
    }
    return out;
}

namespace detail {

template <typename T>
Tensor4<T> gather_batch(const std::vector<Tensor4<T>>& patches, const std::vector<int>& indices) {
    const Shape4 one = patches[indices[0]].shape();
    Tensor4<T> batch(static_cast<int>(indices.size()), one.c, one.h, one.w);
    const long plane = one.size();
    for (size_t i = 0; i < indices.size(); ++i) {
        const Tensor4<T>& patch = patches[indices[i]];
        for (long j = 0; j < plane; ++j) batch[static_cast<long>(i) * plane + j] = patch[j];
    }
    return batch;
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochStat&, const DenoiserModel<float>&)>;

// Runs the full recipe: total_epochs passes over the dataset in shuffled
// mini-batches. Deterministic for a fixed config.seed. Aborts with
// NumericalError if the loss explodes past 1000x its initial value.
inline std::vector<EpochStat> train(DenoiserModel<float>& model, const PatchDataset& dataset,
                                    const TrainingConfig& config,
                                    const EpochCallback& on_epoch = nullptr) {
    config.validate();
    if (dataset.count() == 0) throw ConfigInvalid("empty dataset");
    if (dataset.count() < config.batch_size)
        throw ConfigInvalid("dataset smaller than one batch");

    RngState shuffle_rng(config.seed ^ 0x5A17F00Dull);
    OptimizerState<float> state = OptimizerState<float>::init(model);
    ModelGrads<float> grads;
    std::vector<EpochStat> trace;
    double initial_loss = -1.0;

    for (int epoch = 0; epoch < config.total_epochs; ++epoch) {
        const double lr = lr_at(config, epoch);
        const auto batches = make_batches(dataset.count(), config.batch_size, shuffle_rng);
        double loss_sum = 0.0;
        for (const std::vector<int>& indices : batches) {
            const Tensor4<float> noisy = detail::gather_batch(dataset.noisy, indices);
            const Tensor4<float> clean = detail::gather_batch(dataset.clean, indices);
            const double loss = loss_and_grads(model, noisy, clean, grads);
            if (initial_loss < 0.0) initial_loss = loss;
            if (!(loss < 1000.0 * initial_loss) || !std::isfinite(loss))
                throw NumericalError("loss exploded at step " +
                                     std::to_string(state.step_count) + " (loss " +
                                     std::to_string(loss) + ")");
            step(model, grads, state, config, lr);
            loss_sum += loss;
        }
        state.epoch = epoch + 1;
        const EpochStat stat{epoch, loss_sum / static_cast<double>(batches.size()), lr};
        trace.push_back(stat);
        if (on_epoch) on_epoch(stat, model);
    }
    return trace;
}

}  // namespace drdn
