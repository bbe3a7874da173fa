#pragma once

// Test-side oracles, independent of the library's computation paths:
// direct-definition convolution and dense products, and central
// finite-difference gradient checking. Framework-free so both the Catch2
// suites and the acceptance runner can use them.

#include <cmath>
#include <cstddef>
#include <functional>

#include "smilenet/network.hpp"
#include "smilenet/nnops.hpp"
#include "smilenet/rng.hpp"
#include "smilenet/tensor.hpp"

namespace oracles {

using smilenet::ConvParams;
using smilenet::DenseParams;
using smilenet::Rng;
using smilenet::Tensor;

// Direct transcription of the definition:
// out[o,i,j] = bias[o] + sum_{c,a,b} input[c,i+a,j+b] * kernels[o,c,a,b]
inline Tensor conv2d_reference(const Tensor& input, const ConvParams& p) {
    const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const std::size_t O = p.out_maps(), k = p.kernel();
    Tensor out({O, H - k + 1, W - k + 1});
    for (std::size_t o = 0; o < O; ++o) {
        for (std::size_t i = 0; i + k <= H; ++i) {
            for (std::size_t j = 0; j + k <= W; ++j) {
                double acc = p.bias[o];
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t a = 0; a < k; ++a) {
                        for (std::size_t b = 0; b < k; ++b) {
                            acc += input.at3(c, i + a, j + b) * p.kernels.at4(o, c, a, b);
                        }
                    }
                }
                out.at3(o, i, j) = acc;
            }
        }
    }
    return out;
}

// out[i] = bias[i] + sum_j W[i,j] x[j]
inline Tensor dense_reference(const Tensor& input, const DenseParams& p) {
    Tensor out({p.out_units()});
    for (std::size_t i = 0; i < p.out_units(); ++i) {
        double acc = p.bias[i];
        for (std::size_t j = 0; j < p.in_units(); ++j) {
            acc += p.weights.at2(i, j) * input[j];
        }
        out[i] = acc;
    }
    return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Central finite difference of f w.r.t. element i of t, leaving t unchanged.
template <typename F>
double central_difference(F&& f, Tensor& t, std::size_t i, double step = 1e-5) {
    const double orig = t[i];
    t[i] = orig + step;
    const double up = f();
    t[i] = orig - step;
    const double down = f();
    t[i] = orig;
    return (up - down) / (2.0 * step);
}

// Relative-error gradient agreement; both-near-zero passes.
inline bool gradients_agree(double analytic, double numeric, double tol = 1e-4) {
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    if (denom < 1e-7) return true;
    return std::abs(analytic - numeric) / denom < tol;
}

// Checks analytic against central differences for every element of `t`,
// where `loss` re-evaluates the scalar objective with t's current contents.
// Returns the worst relative error (0 when all coordinates pass the
// near-zero guard).
template <typename F>
double worst_gradient_error(F&& loss, Tensor& t, const Tensor& analytic,
                            double step = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double numeric = central_difference(loss, t, i, step);
        const double denom = std::max(std::abs(analytic[i]), std::abs(numeric));
        if (denom < 1e-7) continue;
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

// sum(weights ⊙ values): the scalar objective used for primitive-level
// gradient checks, so that grad_out = weights exercises a general cotangent.
inline double weighted_sum(const Tensor& values, const Tensor& weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += values[i] * weights[i];
    return acc;
}

// Worst relative error of the analytic whole-network gradient (mean
// cross-entropy over the batch) against central finite differences over
// every parameter coordinate.
inline double whole_network_gradient_error(smilenet::Network& net, const Tensor& batch,
                                           const std::vector<int>& labels) {
    using namespace smilenet;
    ForwardResult fwd = forward(net, batch, Mode::Train);
    Gradients grads = backward(net, fwd, labels);

    auto loss = [&] {
        return mean_cross_entropy(forward(net, batch, Mode::Train).probs, labels);
    };
    double worst = 0.0;
    auto check = [&](Tensor& param, const Tensor& analytic) {
        worst = std::max(worst, worst_gradient_error(loss, param, analytic));
    };
    for (std::size_t s = 0; s < net.convs.size(); ++s) {
        check(net.convs[s].kernels, grads.convs[s].kernels);
        check(net.convs[s].bias, grads.convs[s].bias);
    }
    for (std::size_t d = 0; d < net.denses.size(); ++d) {
        check(net.denses[d].weights, grads.denses[d].weights);
        check(net.denses[d].bias, grads.denses[d].bias);
    }
    return worst;
}

}  // namespace oracles
