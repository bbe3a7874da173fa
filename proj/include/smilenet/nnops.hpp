#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "smilenet/errors.hpp"
#include "smilenet/rng.hpp"
#include "smilenet/tensor.hpp"

// Differentiable numerical primitives: each forward op has a hand-wired
// backward companion producing exact gradients of sum(grad_out * output).

namespace smilenet {

struct ConvParams {
    Tensor kernels;  // [out_maps, in_maps, k, k]
    Tensor bias;     // [out_maps]

    std::size_t out_maps() const { return kernels.dim(0); }
    std::size_t in_maps() const { return kernels.dim(1); }
    std::size_t kernel() const { return kernels.dim(2); }

    static ConvParams zeros(std::size_t out_maps, std::size_t in_maps, std::size_t k) {
        return ConvParams{Tensor({out_maps, in_maps, k, k}), Tensor({out_maps})};
    }
};

struct DenseParams {
    Tensor weights;  // [out_units, in_units]
    Tensor bias;     // [out_units]

    std::size_t out_units() const { return weights.dim(0); }
    std::size_t in_units() const { return weights.dim(1); }

    static DenseParams zeros(std::size_t out_units, std::size_t in_units) {
        return DenseParams{Tensor({out_units, in_units}), Tensor({out_units})};
    }
};

// ---------------------------------------------------------------------------
// Convolution, valid mode, stride 1.
// out[o,i,j] = bias[o] + sum_{c,a,b} input[c,i+a,j+b] * kernels[o,c,a,b]
// ---------------------------------------------------------------------------

inline void check_conv_input(const Tensor& input, const ConvParams& p) {
    if (input.rank() != 3) {
        throw ShapeError("conv2d: input rank " + std::to_string(input.rank()) +
                         ", expected 3 (channels,height,width)");
    }
    if (p.kernels.rank() != 4) {
        throw ShapeError("conv2d: kernels rank " + std::to_string(p.kernels.rank()) +
                         ", expected 4");
    }
    if (p.bias.rank() != 1 || p.bias.dim(0) != p.out_maps()) {
        throw ShapeError("conv2d: bias shape " + p.bias.shape_string() +
                         " does not match out_maps " + std::to_string(p.out_maps()));
    }
    if (p.kernels.dim(2) != p.kernels.dim(3)) {
        throw ShapeError("conv2d: kernel must be square, got " + p.kernels.shape_string());
    }
    if (input.dim(0) != p.in_maps()) {
        throw ShapeError("conv2d: input channels " + std::to_string(input.dim(0)) +
                         " != kernel in_maps " + std::to_string(p.in_maps()));
    }
    const std::size_t k = p.kernel();
    if (input.dim(1) < k) {
        throw ShapeError("conv2d: input height " + std::to_string(input.dim(1)) +
                         " < kernel " + std::to_string(k));
    }
    if (input.dim(2) < k) {
        throw ShapeError("conv2d: input width " + std::to_string(input.dim(2)) +
                         " < kernel " + std::to_string(k));
    }
}

inline Tensor conv2d_valid(const Tensor& input, const ConvParams& p) {
    check_conv_input(input, p);
    const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const std::size_t O = p.out_maps(), k = p.kernel();
    const std::size_t OH = H - k + 1, OW = W - k + 1;

    Tensor out({O, OH, OW});
    for (std::size_t o = 0; o < O; ++o) {
        double* out_plane = out.data() + o * OH * OW;
        const double b = p.bias[o];
        for (std::size_t t = 0; t < OH * OW; ++t) out_plane[t] = b;
        for (std::size_t c = 0; c < C; ++c) {
            const double* in_plane = input.data() + c * H * W;
            for (std::size_t a = 0; a < k; ++a) {
                for (std::size_t bb = 0; bb < k; ++bb) {
                    const double w = p.kernels.at4(o, c, a, bb);
                    for (std::size_t i = 0; i < OH; ++i) {
                        const double* in_row = in_plane + (i + a) * W + bb;
                        double* out_row = out_plane + i * OW;
                        for (std::size_t j = 0; j < OW; ++j) out_row[j] += w * in_row[j];
                    }
                }
            }
        }
    }
    return out;
}

struct ConvGrad {
    Tensor input;    // same shape as conv input
    ConvParams params;  // same shapes as the layer's parameters
};

inline ConvGrad conv2d_backward(const Tensor& input, const ConvParams& p,
                                const Tensor& grad_out) {
    check_conv_input(input, p);
    const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const std::size_t O = p.out_maps(), k = p.kernel();
    const std::size_t OH = H - k + 1, OW = W - k + 1;
    if (grad_out.rank() != 3 || grad_out.dim(0) != O || grad_out.dim(1) != OH ||
        grad_out.dim(2) != OW) {
        throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape_string() +
                         " does not match forward output [" + std::to_string(O) + "x" +
                         std::to_string(OH) + "x" + std::to_string(OW) + "]");
    }

    ConvGrad g{Tensor({C, H, W}), ConvParams::zeros(O, C, k)};
    for (std::size_t o = 0; o < O; ++o) {
        const double* g_plane = grad_out.data() + o * OH * OW;
        double gb = 0.0;
        for (std::size_t t = 0; t < OH * OW; ++t) gb += g_plane[t];
        g.params.bias[o] = gb;

        for (std::size_t c = 0; c < C; ++c) {
            const double* in_plane = input.data() + c * H * W;
            double* gin_plane = g.input.data() + c * H * W;
            for (std::size_t a = 0; a < k; ++a) {
                for (std::size_t bb = 0; bb < k; ++bb) {
                    const double w = p.kernels.at4(o, c, a, bb);
                    double gw = 0.0;
                    for (std::size_t i = 0; i < OH; ++i) {
                        const double* in_row = in_plane + (i + a) * W + bb;
                        double* gin_row = gin_plane + (i + a) * W + bb;
                        const double* g_row = g_plane + i * OW;
                        for (std::size_t j = 0; j < OW; ++j) {
                            gw += g_row[j] * in_row[j];
                            gin_row[j] += w * g_row[j];
                        }
                    }
                    g.params.kernels.at4(o, c, a, bb) = gw;
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Non-overlapping 2x2 max pooling with floor semantics: an odd trailing
// row/column is discarded. argmax stores the winning flat index into the
// input tensor per output cell; ties break to the lowest flat index.
// ---------------------------------------------------------------------------

struct PoolResult {
    Tensor output;                      // [C, H/2, W/2]
    std::vector<std::size_t> argmax;    // one input flat index per output cell
    std::vector<std::size_t> input_shape;
};

inline PoolResult maxpool2x2_forward(const Tensor& input) {
    if (input.rank() != 3) {
        throw ShapeError("maxpool2x2: input rank " + std::to_string(input.rank()) +
                         ", expected 3");
    }
    const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (H < 2 || W < 2) {
        throw ShapeError("maxpool2x2: spatial dims " + std::to_string(H) + "x" +
                         std::to_string(W) + " smaller than window 2x2");
    }
    const std::size_t OH = H / 2, OW = W / 2;

    PoolResult r{Tensor({C, OH, OW}), {}, input.shape()};
    r.argmax.resize(C * OH * OW);
    std::size_t out_idx = 0;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < OH; ++i) {
            for (std::size_t j = 0; j < OW; ++j) {
                const std::size_t base = (c * H + 2 * i) * W + 2 * j;
                std::size_t best = base;
                double best_v = input[base];
                const std::size_t candidates[3] = {base + 1, base + W, base + W + 1};
                for (std::size_t idx : candidates) {
                    if (input[idx] > best_v) {
                        best_v = input[idx];
                        best = idx;
                    }
                }
                r.output[out_idx] = best_v;
                r.argmax[out_idx] = best;
                ++out_idx;
            }
        }
    }
    return r;
}

inline Tensor maxpool2x2_backward(const Tensor& grad_out, const PoolResult& fwd) {
    require_same_shape(grad_out, fwd.output, "maxpool2x2_backward: grad_out");
    Tensor grad_input(fwd.input_shape);
    for (std::size_t t = 0; t < grad_out.size(); ++t) {
        grad_input[fwd.argmax[t]] += grad_out[t];
    }
    return grad_input;
}

// ---------------------------------------------------------------------------
// Fully connected layer: out = W x + b.
// ---------------------------------------------------------------------------

inline void check_dense_input(const Tensor& input, const DenseParams& p) {
    if (input.rank() != 1) {
        throw ShapeError("dense: input rank " + std::to_string(input.rank()) +
                         ", expected 1");
    }
    if (p.weights.rank() != 2) {
        throw ShapeError("dense: weights rank " + std::to_string(p.weights.rank()) +
                         ", expected 2");
    }
    if (p.bias.rank() != 1 || p.bias.dim(0) != p.out_units()) {
        throw ShapeError("dense: bias shape " + p.bias.shape_string() +
                         " does not match out_units " + std::to_string(p.out_units()));
    }
    if (input.dim(0) != p.in_units()) {
        throw ShapeError("dense: input length " + std::to_string(input.dim(0)) +
                         " != in_units " + std::to_string(p.in_units()));
    }
}

inline Tensor dense_forward(const Tensor& input, const DenseParams& p) {
    check_dense_input(input, p);
    const std::size_t m = p.out_units(), n = p.in_units();
    Tensor out({m});
    const double* x = input.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* w_row = p.weights.data() + i * n;
        double acc = p.bias[i];
        for (std::size_t j = 0; j < n; ++j) acc += w_row[j] * x[j];
        out[i] = acc;
    }
    return out;
}

struct DenseGrad {
    Tensor input;       // [in_units]
    DenseParams params;
};

// grad_input = W^T grad_out; grad_W = grad_out outer input; grad_b = grad_out.
inline DenseGrad dense_backward(const Tensor& input, const DenseParams& p,
                                const Tensor& grad_out) {
    check_dense_input(input, p);
    const std::size_t m = p.out_units(), n = p.in_units();
    if (grad_out.rank() != 1 || grad_out.dim(0) != m) {
        throw ShapeError("dense_backward: grad_out shape " + grad_out.shape_string() +
                         " does not match out_units " + std::to_string(m));
    }
    DenseGrad g{Tensor({n}), DenseParams::zeros(m, n)};
    const double* x = input.data();
    double* gin = g.input.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double go = grad_out[i];
        const double* w_row = p.weights.data() + i * n;
        double* gw_row = g.params.weights.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            gw_row[j] = go * x[j];
            gin[j] += go * w_row[j];
        }
        g.params.bias[i] = go;
    }
    return g;
}

// ---------------------------------------------------------------------------
// ReLU. The subgradient at exactly 0 is defined as 0.
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t t = 0; t < input.size(); ++t) out[t] = input[t] > 0.0 ? input[t] : 0.0;
    return out;
}

inline Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    require_same_shape(input, grad_out, "relu_backward");
    Tensor grad_input(input.shape());
    for (std::size_t t = 0; t < input.size(); ++t) {
        grad_input[t] = input[t] > 0.0 ? grad_out[t] : 0.0;
    }
    return grad_input;
}

// ---------------------------------------------------------------------------
// Softmax with max subtraction; outputs in (0,1], rows sum to 1.
// ---------------------------------------------------------------------------

inline Tensor softmax(const Tensor& input) {
    if (input.size() == 0) throw ShapeError("softmax: empty input");
    Tensor out(input.shape());
    double mx = input[0];
    for (std::size_t t = 1; t < input.size(); ++t) mx = std::max(mx, input[t]);
    double sum = 0.0;
    for (std::size_t t = 0; t < input.size(); ++t) {
        out[t] = std::exp(input[t] - mx);
        sum += out[t];
    }
    for (std::size_t t = 0; t < input.size(); ++t) out[t] /= sum;
    return out;
}

// ---------------------------------------------------------------------------
// Negative log-likelihood on softmax probabilities, clamped at 1e-12.
// Gradient w.r.t. the pre-softmax logits is probs - onehot(label).
// ---------------------------------------------------------------------------

inline constexpr double kProbClamp = 1e-12;

inline double cross_entropy(const Tensor& probs, std::size_t label) {
    if (label >= probs.size()) {
        throw ConfigError("cross_entropy: label " + std::to_string(label) +
                          " out of range for " + std::to_string(probs.size()) + " classes");
    }
    return -std::log(std::max(probs[label], kProbClamp));
}

inline Tensor cross_entropy_logit_grad(const Tensor& probs, std::size_t label) {
    if (label >= probs.size()) {
        throw ConfigError("cross_entropy: label " + std::to_string(label) +
                          " out of range for " + std::to_string(probs.size()) + " classes");
    }
    Tensor g = probs;
    g[label] -= 1.0;
    return g;
}

// ---------------------------------------------------------------------------
// Inverted dropout: units survive with probability 1-rate and are scaled by
// 1/(1-rate) at train time, so inference is a pure bypass. The mask stores
// the per-unit scale (0 for dropped), which makes backward a multiply.
// ---------------------------------------------------------------------------

struct DropoutResult {
    Tensor output;
    Tensor mask;  // per-unit scale: 0 or 1/(1-rate)
};

inline DropoutResult dropout_forward(const Tensor& input, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0,1)");
    }
    DropoutResult r{Tensor(input.shape()), Tensor(input.shape())};
    if (rate == 0.0) {
        r.output = input;
        r.mask.fill(1.0);
        return r;
    }
    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t t = 0; t < input.size(); ++t) {
        const double keep = rng.uniform() >= rate ? scale : 0.0;
        r.mask[t] = keep;
        r.output[t] = input[t] * keep;
    }
    return r;
}

inline Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
    require_same_shape(grad_out, mask, "dropout_backward");
    Tensor grad_input(grad_out.shape());
    for (std::size_t t = 0; t < grad_out.size(); ++t) grad_input[t] = grad_out[t] * mask[t];
    return grad_input;
}

}  // namespace smilenet
