#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "smilenet/errors.hpp"
#include "smilenet/network.hpp"
#include "smilenet/parallel.hpp"
#include "smilenet/rng.hpp"

namespace smilenet {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 500;
    int epochs = 1000;
    std::uint64_t seed = 1;
    int eval_every = 1;
};

inline void validate_train_config(const TrainConfig& cfg) {
    // learning_rate 0 is the documented degenerate no-op case.
    if (cfg.learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        throw ConfigError("momentum must be in [0,1)");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

struct Sample {
    Tensor image;  // [1, H, W]
    int label = 0;
};

using Dataset = std::vector<Sample>;

inline Tensor make_batch(const Dataset& data, const std::vector<std::size_t>& order,
                         std::size_t from, std::size_t to) {
    const auto& first_shape = data[order[from]].image.shape();
    const std::size_t per = Tensor::element_count(first_shape);
    Tensor batch({to - from, first_shape[0], first_shape[1], first_shape[2]});
    for (std::size_t b = from; b < to; ++b) {
        const Tensor& img = data[order[b]].image;
        if (img.shape() != first_shape) {
            throw ShapeError("batch: image " + img.shape_string() +
                             " differs from first image shape");
        }
        std::copy(img.data(), img.data() + per, batch.data() + (b - from) * per);
    }
    return batch;
}

// classic momentum: v <- mu*v - lr*g; w <- w + v
inline void sgd_momentum_step(Tensor& weights, const Tensor& grads, Tensor& velocity,
                              double learning_rate, double momentum) {
    require_same_shape(weights, grads, "sgd_momentum_step: grads");
    require_same_shape(weights, velocity, "sgd_momentum_step: velocity");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        velocity[i] = momentum * velocity[i] - learning_rate * grads[i];
        weights[i] += velocity[i];
    }
}

inline void sgd_momentum_step(Network& net, const Gradients& grads, Gradients& velocity,
                              double learning_rate, double momentum) {
    for (std::size_t s = 0; s < net.convs.size(); ++s) {
        sgd_momentum_step(net.convs[s].kernels, grads.convs[s].kernels,
                          velocity.convs[s].kernels, learning_rate, momentum);
        sgd_momentum_step(net.convs[s].bias, grads.convs[s].bias, velocity.convs[s].bias,
                          learning_rate, momentum);
    }
    for (std::size_t d = 0; d < net.denses.size(); ++d) {
        sgd_momentum_step(net.denses[d].weights, grads.denses[d].weights,
                          velocity.denses[d].weights, learning_rate, momentum);
        sgd_momentum_step(net.denses[d].bias, grads.denses[d].bias,
                          velocity.denses[d].bias, learning_rate, momentum);
    }
}

inline double classification_rate(const std::vector<int>& predictions,
                                  const std::vector<int>& labels) {
    if (predictions.empty()) throw ConfigError("classification_rate: empty input");
    if (predictions.size() != labels.size()) {
        throw ConfigError("classification_rate: " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    std::size_t matches = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(predictions.size());
}

// Infer-mode accuracy over a dataset, processed in fixed chunks.
inline double evaluate_accuracy(const Network& net, const Dataset& data) {
    if (data.empty()) throw ConfigError("evaluate_accuracy: empty dataset");
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    constexpr std::size_t kChunk = 128;
    std::size_t matches = 0;
    for (std::size_t from = 0; from < data.size(); from += kChunk) {
        const std::size_t to = std::min(from + kChunk, data.size());
        Tensor batch = make_batch(data, order, from, to);
        std::vector<int> preds = predict(net, batch);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (preds[i] == data[from + i].label) ++matches;
        }
    }
    return static_cast<double>(matches) / static_cast<double>(data.size());
}

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    bool evaluated = false;
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 1-based; 0 when no epoch was evaluated
    double best_val_accuracy = 0.0;
    double best_epoch_test_accuracy = 0.0;
    double final_val_accuracy = 0.0;
    double final_test_accuracy = 0.0;
};

namespace detail {

inline constexpr std::uint64_t kShuffleTag = 0x7368756666ULL;
inline constexpr std::uint64_t kDropoutTag = 0x64726f70ULL;

inline void log_epoch(std::ostream* log, const EpochStats& e) {
    if (!log) return;
    (*log) << "epoch " << e.epoch << " loss " << std::setprecision(10) << e.train_loss
           << " val_acc " << e.val_accuracy << " test_acc " << e.test_accuracy
           << " secs " << std::setprecision(4) << e.seconds << "\n";
    log->flush();
}

}  // namespace detail

// Mini-batch SGD with momentum. Each epoch reshuffles the training set with
// an epoch-indexed RNG derived from cfg.seed; the final partial batch is
// trained on. Validation/test classification rates are recorded every
// cfg.eval_every epochs and always on the last epoch.
inline TrainReport train(Network& net, const Dataset& train_set, const Dataset& val_set,
                         const Dataset& test_set, const TrainConfig& cfg,
                         std::ostream* log = nullptr) {
    validate_train_config(cfg);
    if (train_set.empty() || val_set.empty() || test_set.empty()) {
        throw ConfigError("train: empty split");
    }

    TrainReport report;
    Gradients velocity = zero_gradients(net);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::uint64_t shuffle_root = derive_seed(cfg.seed, detail::kShuffleTag);
    const std::uint64_t dropout_root = derive_seed(cfg.seed, detail::kDropoutTag);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng(derive_seed(shuffle_root, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        Rng dropout_rng(derive_seed(dropout_root, static_cast<std::uint64_t>(epoch)));

        double loss_sum = 0.0;
        int batch_index = 0;
        for (std::size_t from = 0; from < order.size();
             from += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t to =
                std::min(from + static_cast<std::size_t>(cfg.batch_size), order.size());
            Tensor batch = make_batch(train_set, order, from, to);
            std::vector<int> labels(to - from);
            for (std::size_t i = from; i < to; ++i) labels[i - from] = train_set[order[i]].label;

            ForwardResult fwd = forward(net, batch, Mode::Train, &dropout_rng);
            const double loss = mean_cross_entropy(fwd.probs, labels);
            if (!std::isfinite(loss)) {
                throw DivergenceError(epoch + 1, batch_index,
                                      "train: non-finite loss at epoch " +
                                          std::to_string(epoch + 1) + ", batch " +
                                          std::to_string(batch_index));
            }
            loss_sum += loss * static_cast<double>(to - from);
            Gradients grads = backward(net, fwd, labels);
            sgd_momentum_step(net, grads, velocity, cfg.learning_rate, cfg.momentum);
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        const bool last = (epoch + 1 == cfg.epochs);
        if ((epoch + 1) % cfg.eval_every == 0 || last) {
            stats.evaluated = true;
            stats.val_accuracy = evaluate_accuracy(net, val_set);
            stats.test_accuracy = evaluate_accuracy(net, test_set);
        }
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (stats.evaluated) {
            detail::log_epoch(log, stats);
            if (report.best_epoch == 0 || stats.val_accuracy > report.best_val_accuracy) {
                report.best_epoch = stats.epoch;
                report.best_val_accuracy = stats.val_accuracy;
                report.best_epoch_test_accuracy = stats.test_accuracy;
            }
            report.final_val_accuracy = stats.val_accuracy;
            report.final_test_accuracy = stats.test_accuracy;
        }
        report.epochs.push_back(stats);
    }
    return report;
}

struct RepeatStats {
    double mean = 0.0;
    double sample_std = 0.0;
    std::vector<double> accuracies;
};

// Sample standard deviation with the n-1 denominator. All-equal inputs
// return exactly zero rather than rounding noise from the mean.
inline RepeatStats mean_and_sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) throw ConfigError("repeat statistics require n >= 2");
    RepeatStats r;
    r.accuracies = xs;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
        r.mean = xs.front();
        r.sample_std = 0.0;
        return r;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sample_std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return r;
}

inline constexpr std::uint64_t kRepeatTag = 0x7265706561ULL;

// Runs n experiments with pre-derived per-run seeds (fresh weight init and
// fresh data split both hang off run_seed) and reports test-accuracy stats.
// Runs may execute concurrently; results match the serial schedule.
inline RepeatStats repeat_experiment(
    const std::function<double(std::uint64_t run_seed)>& run_one, std::uint64_t master_seed,
    int n, int threads = 0) {
    if (n < 2) throw ConfigError("repeat_experiment: n must be >= 2");
    std::vector<double> accs(static_cast<std::size_t>(n));
    for_each_index(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        accs[i] = run_one(derive_seed(master_seed, kRepeatTag + i));
    });
    return mean_and_sample_std(accs);
}

}  // namespace smilenet
