// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lasc/augment.hpp"
#include "lasc/common.hpp"
#include "lasc/model_io.hpp"
#include "lasc/network.hpp"
#include "lasc/tensor.hpp"

namespace lasc {

struct TrainConfig {
    size_t batch_size = 16;
    size_t epochs = 100;
    double lr_max = 1e-3;
    double lr_min = 1e-7;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-7;
    std::vector<uint64_t> seeds = {1, 2, 3};
    bool mixup = false;  // batch-level mix-up on the fly
    double mixup_alpha = 0.4;

    void validate() const {
        if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
        if (epochs < 1) throw Error("train config: epochs must be >= 1");
        if (lr_min > lr_max) throw Error("train config: lr_min must be <= lr_max");
        if (seeds.empty()) throw Error("train config: need at least one seed");
    }
};

// loss = -sum_c target[c] * ln(clip(probs[c])), clip to [1e-15, 1-1e-15].
inline double cross_entropy(const std::vector<double>& probs, const std::vector<double>& target) {
    if (probs.size() != target.size()) throw Error("cross_entropy: length mismatch");
    double loss = 0.0;
    for (size_t c = 0; c < probs.size(); ++c)
        loss -= target[c] * std::log(std::clamp(probs[c], 1e-15, 1.0 - 1e-15));
    return loss;
}

// Cosine annealing between lr_max (epoch 0) and lr_min (epoch T). Written as
// a convex combination so both endpoints are hit exactly.
inline double cosine_lr(size_t epoch, size_t total_epochs, double lr_max, double lr_min) {
    if (epoch > total_epochs)
        throw Error("cosine_lr: epoch " + std::to_string(epoch) + " out of range [0, " +
                    std::to_string(total_epochs) + "]");
    const double w =
        0.5 * (1.0 + std::cos(std::numbers::pi * double(epoch) / double(total_epochs)));
    return lr_max * w + lr_min * (1.0 - w);
}

struct OptimizerState {
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<Moments> slots;  // one per tensor, in ModelParams order
    size_t t = 0;
};

// Standard Adam with bias correction. Slots are created lazily on the first
// step; running BN statistics receive zero gradients and stay untouched.
inline void adam_step(nn::ModelParams& params, const nn::ModelParams& grads, OptimizerState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7) {
    if (grads.tensors.size() != params.tensors.size())
        throw Error("adam_step: gradient set does not mirror the parameters");
    if (state.slots.empty()) {
        state.slots.resize(params.tensors.size());
        for (size_t i = 0; i < params.tensors.size(); ++i) {
            state.slots[i].m.assign(params.tensors[i].values.size(), 0.0);
            state.slots[i].v.assign(params.tensors[i].values.size(), 0.0);
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(beta2, double(state.t));
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        auto& p = params.tensors[i];
        const auto& g = grads.tensors[i];
        if (g.name != p.name || g.values.size() != p.values.size())
            throw Error("adam_step: gradient tensor '" + g.name + "' does not match '" + p.name +
                        "'");
        auto& m = state.slots[i].m;
        auto& v = state.slots[i].v;
        for (size_t k = 0; k < p.values.size(); ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g.values[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g.values[k] * g.values[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p.values[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

struct Example {
    Tensor feature;
    int label = 0;
};
using Dataset = std::vector<Example>;

inline std::vector<double> one_hot(int label, size_t classes = 10) {
    std::vector<double> y(classes, 0.0);
    if (label < 0 || size_t(label) >= classes)
        throw Error("one_hot: label " + std::to_string(label) + " out of range");
    y[size_t(label)] = 1.0;
    return y;
}

// Copy with every value rounded through 32-bit float: exactly what a saved
// f32 checkpoint holds. Validation runs on this view so the logged curve
// matches the checkpoint on disk.
inline nn::ModelParams checkpoint_view(const nn::ModelParams& params) {
    nn::ModelParams out = params;
    for (auto& t : out.tensors)
        for (double& v : t.values) v = double(float(v));
    return out;
}

inline double dataset_accuracy(nn::ModelParams& params, const nn::NetworkConfig& cfg,
                               const Dataset& data) {
    if (data.empty()) throw Error("dataset_accuracy: empty dataset");
    size_t hits = 0;
    for (const auto& ex : data) {
        const auto probs = nn::network_forward(ex.feature, params, cfg, nn::Mode::kInfer);
        const size_t pred =
            size_t(std::max_element(probs.begin(), probs.end()) - probs.begin());
        hits += pred == size_t(ex.label);
    }
    return double(hits) / double(data.size());
}

struct EpochRow {
    size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct SeedResult {
    uint64_t seed = 0;
    std::vector<EpochRow> curve;
    size_t best_epoch = 0;
    double best_val_accuracy = 0.0;
    nn::ModelParams best_params;  // f32-rounded snapshot, as saved
    std::string checkpoint_path;
};

struct TrainReport {
    std::vector<SeedResult> per_seed;
    double mean_best_accuracy = 0.0;  // the headline number
};

inline void write_train_csv(const SeedResult& r, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot create training report: " + path);
    f << "epoch,lr,train_loss,val_accuracy\n";
    f.precision(17);
    for (const auto& row : r.curve)
        f << row.epoch << ',' << row.lr << ',' << row.train_loss << ',' << row.val_accuracy
          << "\n";
}

namespace detail {

// Two independently shuffled passes over the dataset give the two loaded
// batches that mix-up combines.
inline std::vector<size_t> shuffled_indices(size_t n, std::mt19937_64& rng) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace detail

// Trains one model per seed, tracks the best-validation checkpoint (ties go
// to the earlier epoch), and reports the per-seed best accuracies plus their
// mean. Checkpoints are written to model_dir unless it is empty. Everything
// is deterministic given (seed, config, data).
inline TrainReport train_run(const TrainConfig& cfg, const Dataset& train_data,
                             const Dataset& val_data, const nn::NetworkConfig& net_cfg,
                             const std::string& model_dir = {}) {
    cfg.validate();
    net_cfg.validate();
    if (train_data.empty()) throw Error("train_run: empty training dataset");
    if (val_data.empty()) throw Error("train_run: empty validation dataset");
    for (const auto& ex : train_data)
        if (ex.feature.h != net_cfg.input_h || ex.feature.w != net_cfg.input_w ||
            ex.feature.c != net_cfg.input_c)
            throw Error("train_run: feature shape " + ex.feature.shape_str() +
                        " does not match network input");

    TrainReport report;
    for (uint64_t seed : cfg.seeds) {
        std::mt19937_64 rng(seed);
        nn::ModelParams params = nn::init_params(net_cfg, seed);
        OptimizerState opt;

        SeedResult result;
        result.seed = seed;

        for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min);
            const auto order_a = detail::shuffled_indices(train_data.size(), rng);
            const auto order_b =
                cfg.mixup ? detail::shuffled_indices(train_data.size(), rng) : order_a;

            double loss_sum = 0.0;
            size_t steps = 0;
            for (size_t start = 0; start < train_data.size(); start += cfg.batch_size) {
                const size_t end = std::min(start + cfg.batch_size, train_data.size());
                nn::Batch batch;
                std::vector<std::vector<double>> targets;
                batch.reserve(end - start);
                targets.reserve(end - start);
                for (size_t k = start; k < end; ++k) {
                    batch.push_back(train_data[order_a[k]].feature);
                    targets.push_back(one_hot(train_data[order_a[k]].label, net_cfg.class_count));
                }
                if (cfg.mixup) {
                    nn::Batch other;
                    std::vector<std::vector<double>> other_targets;
                    other.reserve(end - start);
                    other_targets.reserve(end - start);
                    for (size_t k = start; k < end; ++k) {
                        other.push_back(train_data[order_b[k]].feature);
                        other_targets.push_back(
                            one_hot(train_data[order_b[k]].label, net_cfg.class_count));
                    }
                    auto mixed = mixup_batches(batch, targets, other, other_targets,
                                               cfg.mixup_alpha, rng);
                    batch = std::move(mixed.features);
                    targets = std::move(mixed.labels);
                }

                nn::ForwardCache cache;
                const auto probs =
                    nn::network_forward_batch(batch, params, net_cfg, nn::Mode::kTrain, &cache);
                double loss = 0.0;
                for (size_t b = 0; b < probs.size(); ++b)
                    loss += cross_entropy(probs[b], targets[b]);
                loss /= double(probs.size());
                loss_sum += loss;
                ++steps;

                auto grads = nn::network_backward_from_cache(cache, targets, params, net_cfg);
                adam_step(params, grads.params, opt, lr, cfg.adam_beta1, cfg.adam_beta2,
                          cfg.adam_eps);
            }

            nn::ModelParams snapshot = checkpoint_view(params);
            const double val_acc = dataset_accuracy(snapshot, net_cfg, val_data);
            result.curve.push_back({epoch, lr, loss_sum / double(steps), val_acc});
            if (result.curve.size() == 1 || val_acc > result.best_val_accuracy) {
                result.best_val_accuracy = val_acc;
                result.best_epoch = epoch;
                result.best_params = std::move(snapshot);
            }
        }

        if (!model_dir.empty()) {
            std::filesystem::create_directories(model_dir);
            result.checkpoint_path =
                (std::filesystem::path(model_dir) / ("seed_" + std::to_string(seed) + ".lasc"))
                    .string();
            save_model(result.best_params, result.checkpoint_path);
        }
        report.per_seed.push_back(std::move(result));
    }

    double sum = 0.0;
    for (const auto& r : report.per_seed) sum += r.best_val_accuracy;
    report.mean_best_accuracy = sum / double(report.per_seed.size());
    return report;
}

}  // namespace lasc
