#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "smilenet/errors.hpp"
#include "smilenet/nnops.hpp"
#include "smilenet/rng.hpp"
#include "smilenet/tensor.hpp"

namespace smilenet {

// The four tunable parameters plus input geometry. Everything else about the
// architecture is fixed: 5x5 kernels, 32 feature maps per convolution stage,
// 2x2 max pooling, a 2-unit softmax output.
struct ArchitectureConfig {
    int num_convolutions = 1;
    int num_hidden_layers = 1;
    int units_per_hidden_layer = 100;
    double dropout_rate = 0.5;
    int input_height = 0;
    int input_width = 0;

    static constexpr int kKernel = 5;
    static constexpr int kFeatureMaps = 32;
    static constexpr int kPool = 2;
    static constexpr int kClasses = 2;

    bool operator==(const ArchitectureConfig&) const = default;
};

struct StageShape {
    std::size_t channels = 0, height = 0, width = 0;
    bool operator==(const StageShape&) const = default;
};

// Derived per-stage shapes; computed once at build time.
struct LayerPlan {
    std::vector<StageShape> conv_inputs;   // input seen by conv stage s
    std::vector<StageShape> conv_outputs;  // after the 5x5 valid convolution
    std::vector<StageShape> pool_outputs;  // after 2x2 max pooling
    std::size_t flatten_size = 0;
    std::vector<std::size_t> dense_outputs;  // hidden layer sizes then 2
};

inline void validate_architecture(const ArchitectureConfig& cfg) {
    if (cfg.num_convolutions < 1) throw ConfigError("num_convolutions must be >= 1");
    if (cfg.num_hidden_layers < 1) throw ConfigError("num_hidden_layers must be >= 1");
    if (cfg.units_per_hidden_layer < 1)
        throw ConfigError("units_per_hidden_layer must be >= 1");
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
        throw ConfigError("dropout_rate must be in [0,1)");
    if (cfg.input_height < 1 || cfg.input_width < 1)
        throw ConfigError("input dimensions must be positive");
}

inline LayerPlan compute_layer_plan(const ArchitectureConfig& cfg) {
    validate_architecture(cfg);
    LayerPlan plan;
    StageShape cur{1, static_cast<std::size_t>(cfg.input_height),
                   static_cast<std::size_t>(cfg.input_width)};
    for (int s = 0; s < cfg.num_convolutions; ++s) {
        if (cur.height < ArchitectureConfig::kKernel ||
            cur.width < ArchitectureConfig::kKernel) {
            throw ShapeError("convolution stage " + std::to_string(s + 1) + ": input " +
                             std::to_string(cur.height) + "x" + std::to_string(cur.width) +
                             " has a spatial dim smaller than the 5x5 kernel");
        }
        plan.conv_inputs.push_back(cur);
        cur = StageShape{ArchitectureConfig::kFeatureMaps,
                         cur.height - ArchitectureConfig::kKernel + 1,
                         cur.width - ArchitectureConfig::kKernel + 1};
        plan.conv_outputs.push_back(cur);
        if (cur.height < 2 || cur.width < 2) {
            throw ShapeError("pooling stage " + std::to_string(s + 1) + ": input " +
                             std::to_string(cur.height) + "x" + std::to_string(cur.width) +
                             " smaller than the 2x2 window");
        }
        cur = StageShape{cur.channels, cur.height / 2, cur.width / 2};
        plan.pool_outputs.push_back(cur);
    }
    plan.flatten_size = cur.channels * cur.height * cur.width;
    for (int d = 0; d < cfg.num_hidden_layers; ++d) {
        plan.dense_outputs.push_back(static_cast<std::size_t>(cfg.units_per_hidden_layer));
    }
    plan.dense_outputs.push_back(ArchitectureConfig::kClasses);
    return plan;
}

// Layer sequence: [Conv(5x5,32) -> ReLU -> MaxPool(2x2)] x num_convolutions
// -> flatten -> [Dense(units) -> ReLU -> Dropout(rate)] x num_hidden_layers
// -> Dense(2) -> softmax.
struct Network {
    ArchitectureConfig config;
    LayerPlan plan;
    std::vector<ConvParams> convs;
    std::vector<DenseParams> denses;  // hidden layers followed by the output layer
};

namespace detail {

inline void glorot_uniform_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                                Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
}

}  // namespace detail

// Glorot-uniform weights, zero biases, one deterministic stream per seed.
inline Network build(const ArchitectureConfig& cfg, std::uint64_t seed) {
    Network net;
    net.config = cfg;
    net.plan = compute_layer_plan(cfg);
    Rng rng(seed);

    const std::size_t k = ArchitectureConfig::kKernel;
    for (int s = 0; s < cfg.num_convolutions; ++s) {
        const std::size_t in_maps = net.plan.conv_inputs[s].channels;
        const std::size_t out_maps = ArchitectureConfig::kFeatureMaps;
        ConvParams p = ConvParams::zeros(out_maps, in_maps, k);
        detail::glorot_uniform_fill(p.kernels, in_maps * k * k, out_maps * k * k, rng);
        net.convs.push_back(std::move(p));
    }
    std::size_t in_units = net.plan.flatten_size;
    for (std::size_t out_units : net.plan.dense_outputs) {
        DenseParams p = DenseParams::zeros(out_units, in_units);
        detail::glorot_uniform_fill(p.weights, in_units, out_units, rng);
        net.denses.push_back(std::move(p));
        in_units = out_units;
    }
    return net;
}

struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

// Parameter tensors in build order; the order is the checkpoint contract.
inline std::vector<NamedTensor> parameter_tensors(Network& net) {
    std::vector<NamedTensor> out;
    for (std::size_t s = 0; s < net.convs.size(); ++s) {
        const std::string prefix = "conv" + std::to_string(s + 1);
        out.push_back({prefix + ".kernels", &net.convs[s].kernels});
        out.push_back({prefix + ".bias", &net.convs[s].bias});
    }
    for (std::size_t d = 0; d < net.denses.size(); ++d) {
        const bool is_output = (d + 1 == net.denses.size());
        const std::string prefix =
            is_output ? "output" : "hidden" + std::to_string(d + 1);
        out.push_back({prefix + ".weights", &net.denses[d].weights});
        out.push_back({prefix + ".bias", &net.denses[d].bias});
    }
    return out;
}

inline std::size_t parameter_count(const Network& net) {
    std::size_t n = 0;
    for (const auto& c : net.convs) n += c.kernels.size() + c.bias.size();
    for (const auto& d : net.denses) n += d.weights.size() + d.bias.size();
    return n;
}

enum class Mode { Train, Infer };

// Everything backward needs, stored per sample.
struct SampleCache {
    std::vector<Tensor> conv_inputs;
    std::vector<Tensor> conv_pre_relu;
    std::vector<PoolResult> pools;
    std::vector<Tensor> dense_inputs;    // input to each hidden dense layer
    std::vector<Tensor> dense_pre_relu;  // hidden pre-activations
    std::vector<Tensor> dropout_masks;
    Tensor output_input;  // input to the final dense layer
    Tensor probs;
};

struct ForwardResult {
    Tensor probs;  // [B, 2]
    std::vector<SampleCache> cache;
    Mode mode = Mode::Infer;
};

namespace detail {

inline void check_batch(const Network& net, const Tensor& batch) {
    if (batch.rank() != 4) {
        throw ShapeError("forward: batch rank " + std::to_string(batch.rank()) +
                         ", expected 4 (batch,channel,height,width)");
    }
    if (batch.dim(1) != 1 ||
        batch.dim(2) != static_cast<std::size_t>(net.config.input_height) ||
        batch.dim(3) != static_cast<std::size_t>(net.config.input_width)) {
        throw ShapeError("forward: batch shape " + batch.shape_string() +
                         " does not match configured input 1x" +
                         std::to_string(net.config.input_height) + "x" +
                         std::to_string(net.config.input_width));
    }
}

inline Tensor slice_sample(const Tensor& batch, std::size_t b) {
    const std::size_t C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    const std::size_t n = C * H * W;
    std::vector<double> data(batch.data() + b * n, batch.data() + (b + 1) * n);
    return Tensor({C, H, W}, std::move(data));
}

inline Tensor flatten(const Tensor& t) {
    return Tensor({t.size()}, t.values());
}

// Runs one sample through the network. `cache` may be null for inference.
inline Tensor forward_sample(const Network& net, Tensor x, Mode mode, Rng* rng,
                             SampleCache* cache) {
    for (std::size_t s = 0; s < net.convs.size(); ++s) {
        if (cache) cache->conv_inputs.push_back(x);
        Tensor z = conv2d_valid(x, net.convs[s]);
        if (cache) cache->conv_pre_relu.push_back(z);
        PoolResult pooled = maxpool2x2_forward(relu(z));
        x = pooled.output;
        if (cache) cache->pools.push_back(std::move(pooled));
    }
    x = flatten(x);
    const std::size_t hidden = net.denses.size() - 1;
    for (std::size_t d = 0; d < hidden; ++d) {
        if (cache) cache->dense_inputs.push_back(x);
        Tensor z = dense_forward(x, net.denses[d]);
        if (cache) cache->dense_pre_relu.push_back(z);
        x = relu(z);
        if (mode == Mode::Train && net.config.dropout_rate > 0.0) {
            DropoutResult dr = dropout_forward(x, net.config.dropout_rate, *rng);
            x = std::move(dr.output);
            if (cache) cache->dropout_masks.push_back(std::move(dr.mask));
        } else if (cache) {
            Tensor identity(x.shape());
            identity.fill(1.0);
            cache->dropout_masks.push_back(std::move(identity));
        }
    }
    if (cache) cache->output_input = x;
    Tensor probs = softmax(dense_forward(x, net.denses.back()));
    if (cache) cache->probs = probs;
    return probs;
}

}  // namespace detail

// Full forward pass retaining per-sample activations for backward. In train
// mode with a positive dropout rate an Rng must be supplied.
inline ForwardResult forward(const Network& net, const Tensor& batch, Mode mode,
                             Rng* rng = nullptr) {
    detail::check_batch(net, batch);
    if (mode == Mode::Train && net.config.dropout_rate > 0.0 && rng == nullptr) {
        throw ConfigError("forward: train mode with dropout requires an rng");
    }
    const std::size_t B = batch.dim(0);
    ForwardResult result;
    result.mode = mode;
    result.probs = Tensor({B, static_cast<std::size_t>(ArchitectureConfig::kClasses)});
    result.cache.resize(B);
    for (std::size_t b = 0; b < B; ++b) {
        Tensor probs = detail::forward_sample(net, detail::slice_sample(batch, b), mode,
                                              rng, &result.cache[b]);
        for (std::size_t c = 0; c < probs.size(); ++c) result.probs.at2(b, c) = probs[c];
    }
    return result;
}

// Cache-free forward for evaluation; dropout is bypassed.
inline Tensor infer_probs(const Network& net, const Tensor& batch) {
    detail::check_batch(net, batch);
    const std::size_t B = batch.dim(0);
    Tensor probs({B, static_cast<std::size_t>(ArchitectureConfig::kClasses)});
    for (std::size_t b = 0; b < B; ++b) {
        Tensor p = detail::forward_sample(net, detail::slice_sample(batch, b),
                                          Mode::Infer, nullptr, nullptr);
        for (std::size_t c = 0; c < p.size(); ++c) probs.at2(b, c) = p[c];
    }
    return probs;
}

struct Gradients {
    std::vector<ConvParams> convs;
    std::vector<DenseParams> denses;
};

inline void accumulate(ConvParams& into, const ConvParams& delta) {
    for (std::size_t i = 0; i < into.kernels.size(); ++i) into.kernels[i] += delta.kernels[i];
    for (std::size_t i = 0; i < into.bias.size(); ++i) into.bias[i] += delta.bias[i];
}

inline void accumulate(DenseParams& into, const DenseParams& delta) {
    for (std::size_t i = 0; i < into.weights.size(); ++i) into.weights[i] += delta.weights[i];
    for (std::size_t i = 0; i < into.bias.size(); ++i) into.bias[i] += delta.bias[i];
}

inline Gradients zero_gradients(const Network& net) {
    Gradients g;
    for (const auto& c : net.convs) {
        g.convs.push_back(ConvParams::zeros(c.out_maps(), c.in_maps(), c.kernel()));
    }
    for (const auto& d : net.denses) {
        g.denses.push_back(DenseParams::zeros(d.out_units(), d.in_units()));
    }
    return g;
}

inline double mean_cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
        throw ShapeError("mean_cross_entropy: probs " + probs.shape_string() + " vs " +
                         std::to_string(labels.size()) + " labels");
    }
    double total = 0.0;
    for (std::size_t b = 0; b < labels.size(); ++b) {
        Tensor row({probs.dim(1)},
                   std::vector<double>(probs.data() + b * probs.dim(1),
                                       probs.data() + (b + 1) * probs.dim(1)));
        total += cross_entropy(row, static_cast<std::size_t>(labels[b]));
    }
    return total / static_cast<double>(labels.size());
}

// Gradients of the mean cross-entropy over the batch w.r.t. every parameter.
inline Gradients backward(const Network& net, const ForwardResult& fwd,
                          const std::vector<int>& labels) {
    const std::size_t B = fwd.cache.size();
    if (labels.size() != B) {
        throw ShapeError("backward: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(B) + " cached samples");
    }
    for (int label : labels) {
        if (label < 0 || label >= ArchitectureConfig::kClasses) {
            throw ConfigError("backward: label " + std::to_string(label) +
                              " outside {0,1}");
        }
    }

    Gradients grads = zero_gradients(net);
    const double inv_b = 1.0 / static_cast<double>(B);
    const std::size_t hidden = net.denses.size() - 1;

    for (std::size_t b = 0; b < B; ++b) {
        const SampleCache& sc = fwd.cache[b];
        // d(mean loss)/d(logits) = (p - y) / B
        Tensor g = cross_entropy_logit_grad(sc.probs, static_cast<std::size_t>(labels[b]));
        for (std::size_t c = 0; c < g.size(); ++c) g[c] *= inv_b;

        DenseGrad out_g = dense_backward(sc.output_input, net.denses.back(), g);
        accumulate(grads.denses.back(), out_g.params);
        Tensor upstream = std::move(out_g.input);

        for (std::size_t d = hidden; d-- > 0;) {
            if (fwd.mode == Mode::Train && net.config.dropout_rate > 0.0) {
                upstream = dropout_backward(upstream, sc.dropout_masks[d]);
            }
            upstream = relu_backward(sc.dense_pre_relu[d], upstream);
            DenseGrad dg = dense_backward(sc.dense_inputs[d], net.denses[d], upstream);
            accumulate(grads.denses[d], dg.params);
            upstream = std::move(dg.input);
        }

        for (std::size_t s = net.convs.size(); s-- > 0;) {
            const PoolResult& pool = sc.pools[s];
            Tensor pooled_grad(pool.output.shape(), upstream.values());
            Tensor pre_pool = maxpool2x2_backward(pooled_grad, pool);
            Tensor pre_relu_grad = relu_backward(sc.conv_pre_relu[s], pre_pool);
            ConvGrad cg = conv2d_backward(sc.conv_inputs[s], net.convs[s], pre_relu_grad);
            accumulate(grads.convs[s], cg.params);
            upstream = detail::flatten(cg.input);
        }
    }
    return grads;
}

// Class predictions from infer-mode probabilities; exact ties go to class 0.
inline std::vector<int> predict(const Network& net, const Tensor& batch) {
    Tensor probs = infer_probs(net, batch);
    std::vector<int> out(probs.dim(0));
    for (std::size_t b = 0; b < probs.dim(0); ++b) {
        out[b] = probs.at2(b, 1) > probs.at2(b, 0) ? 1 : 0;
    }
    return out;
}

}  // namespace smilenet
