// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lasc/common.hpp"
#include "lasc/tensor.hpp"

// Network layers as pure functions: each forward optionally fills a cache,
// each backward consumes it. Everything is evaluated in double so analytic
// gradients can be validated against central finite differences.
namespace lasc::nn {

enum class Mode { kTrain, kInfer };

using Batch = std::vector<Tensor>;

// ---------------------------------------------------------------- ReLU

inline Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

// x is the forward input (the mask source).
inline Tensor relu_backward(const Tensor& dy, const Tensor& x) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i)
        if (x.data[i] <= 0.0) dx.data[i] = 0.0;
    return dx;
}

// ------------------------------------------------- pointwise (1x1) conv
// kernel: (Cin x Cout) matrix, bias: length Cout.

inline Tensor pointwise_conv_forward(const Tensor& x, const Matrix& kernel,
                                     const std::vector<double>& bias) {
    if (kernel.rows != x.c)
        throw Error("pointwise conv: kernel expects " + std::to_string(kernel.rows) +
                    " input channels, tensor has " + std::to_string(x.c));
    if (bias.size() != kernel.cols) throw Error("pointwise conv: bias length mismatch");

    const size_t cout = kernel.cols;
    Tensor y(x.h, x.w, cout);
    for (size_t hw = 0; hw < x.h * x.w; ++hw) {
        const double* xin = x.data.data() + hw * x.c;
        double* out = y.data.data() + hw * cout;
        for (size_t o = 0; o < cout; ++o) out[o] = bias[o];
        for (size_t i = 0; i < x.c; ++i) {
            const double xi = xin[i];
            const double* krow = kernel.v.data() + i * cout;
            for (size_t o = 0; o < cout; ++o) out[o] += xi * krow[o];
        }
    }
    return y;
}

struct PointwiseGrads {
    Matrix dkernel;
    std::vector<double> dbias;
    Tensor dx;
};

inline PointwiseGrads pointwise_conv_backward(const Tensor& x, const Matrix& kernel,
                                              const Tensor& dy) {
    const size_t cout = kernel.cols;
    PointwiseGrads g;
    g.dkernel = Matrix(kernel.rows, kernel.cols);
    g.dbias.assign(cout, 0.0);
    g.dx = Tensor(x.h, x.w, x.c);
    for (size_t hw = 0; hw < x.h * x.w; ++hw) {
        const double* xin = x.data.data() + hw * x.c;
        const double* dout = dy.data.data() + hw * cout;
        double* dxin = g.dx.data.data() + hw * x.c;
        for (size_t o = 0; o < cout; ++o) g.dbias[o] += dout[o];
        for (size_t i = 0; i < x.c; ++i) {
            const double* krow = kernel.v.data() + i * cout;
            double* dkrow = g.dkernel.v.data() + i * cout;
            double acc = 0.0;
            for (size_t o = 0; o < cout; ++o) {
                dkrow[o] += xin[i] * dout[o];
                acc += krow[o] * dout[o];
            }
            dxin[i] = acc;
        }
    }
    return g;
}

// ------------------------------------------------ depthwise 3x3 conv
// One 3x3 filter per channel, stride 1, zero-padded "same" borders.
// kernel: Tensor(3, 3, C), bias: length C.

inline Tensor depthwise_conv_forward(const Tensor& x, const Tensor& kernel,
                                     const std::vector<double>& bias) {
    if (kernel.h != 3 || kernel.w != 3)
        throw Error("depthwise conv: kernel must be 3x3");
    if (kernel.c != x.c)
        throw Error("depthwise conv: kernel has " + std::to_string(kernel.c) +
                    " channels, tensor has " + std::to_string(x.c));
    if (bias.size() != x.c) throw Error("depthwise conv: bias length mismatch");

    Tensor y(x.h, x.w, x.c);
    const long H = long(x.h), W = long(x.w);
    for (long h = 0; h < H; ++h)
        for (long w = 0; w < W; ++w) {
            double* out = y.data.data() + size_t(h * W + w) * x.c;
            for (size_t c = 0; c < x.c; ++c) out[c] = bias[c];
            for (long dh = -1; dh <= 1; ++dh) {
                const long ih = h + dh;
                if (ih < 0 || ih >= H) continue;
                for (long dw = -1; dw <= 1; ++dw) {
                    const long iw = w + dw;
                    if (iw < 0 || iw >= W) continue;
                    const double* xin = x.data.data() + size_t(ih * W + iw) * x.c;
                    const double* k = kernel.data.data() + size_t((dh + 1) * 3 + (dw + 1)) * x.c;
                    for (size_t c = 0; c < x.c; ++c) out[c] += xin[c] * k[c];
                }
            }
        }
    return y;
}

struct DepthwiseGrads {
    Tensor dkernel;
    std::vector<double> dbias;
    Tensor dx;
};

inline DepthwiseGrads depthwise_conv_backward(const Tensor& x, const Tensor& kernel,
                                              const Tensor& dy) {
    DepthwiseGrads g;
    g.dkernel = Tensor(3, 3, x.c);
    g.dbias.assign(x.c, 0.0);
    g.dx = Tensor(x.h, x.w, x.c);
    const long H = long(x.h), W = long(x.w);
    for (long h = 0; h < H; ++h)
        for (long w = 0; w < W; ++w) {
            const double* dout = dy.data.data() + size_t(h * W + w) * x.c;
            for (size_t c = 0; c < x.c; ++c) g.dbias[c] += dout[c];
            for (long dh = -1; dh <= 1; ++dh) {
                const long ih = h + dh;
                if (ih < 0 || ih >= H) continue;
                for (long dw = -1; dw <= 1; ++dw) {
                    const long iw = w + dw;
                    if (iw < 0 || iw >= W) continue;
                    const double* xin = x.data.data() + size_t(ih * W + iw) * x.c;
                    double* dxin = g.dx.data.data() + size_t(ih * W + iw) * x.c;
                    const size_t koff = size_t((dh + 1) * 3 + (dw + 1)) * x.c;
                    const double* k = kernel.data.data() + koff;
                    double* dk = g.dkernel.data.data() + koff;
                    for (size_t c = 0; c < x.c; ++c) {
                        dk[c] += xin[c] * dout[c];
                        dxin[c] += k[c] * dout[c];
                    }
                }
            }
        }
    return g;
}

// --------------------------------------------------------- batch norm
// Normalizes per channel over (batch, H, W). Train mode uses batch
// statistics (biased variance) and updates the running estimates in place;
// infer mode uses the running estimates.

struct BatchNormState {
    std::vector<double>* running_mean = nullptr;
    std::vector<double>* running_var = nullptr;
    bool initialized = false;  // running stats hold meaningful values
};

struct BatchNormCache {
    std::vector<double> inv_std;  // 1/sqrt(var + eps) per channel
    Batch xhat;
};

inline Batch batchnorm_forward(const Batch& x, const std::vector<double>& gamma,
                               const std::vector<double>& beta, Mode mode, BatchNormState state,
                               BatchNormCache* cache = nullptr, double eps = 1e-3,
                               double momentum = 0.99) {
    if (x.empty()) throw Error("batchnorm: empty batch");
    const size_t C = x[0].c;
    if (gamma.size() != C || beta.size() != C)
        throw Error("batchnorm: parameter length != channel count");
    if (!state.running_mean || !state.running_var)
        throw Error("batchnorm: missing running statistics storage");

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (mode == Mode::kTrain) {
        const double m = double(x.size() * x[0].h * x[0].w);
        for (const Tensor& t : x)
            for (size_t hw = 0; hw < t.h * t.w; ++hw)
                for (size_t c = 0; c < C; ++c) mean[c] += t.data[hw * C + c];
        for (double& v : mean) v /= m;
        for (const Tensor& t : x)
            for (size_t hw = 0; hw < t.h * t.w; ++hw)
                for (size_t c = 0; c < C; ++c) {
                    const double d = t.data[hw * C + c] - mean[c];
                    var[c] += d * d;
                }
        for (double& v : var) v /= m;
        for (size_t c = 0; c < C; ++c) {
            (*state.running_mean)[c] = momentum * (*state.running_mean)[c] + (1.0 - momentum) * mean[c];
            (*state.running_var)[c] = momentum * (*state.running_var)[c] + (1.0 - momentum) * var[c];
        }
    } else {
        if (!state.initialized)
            throw Error("batchnorm: inference requested before any running statistics exist");
        mean = *state.running_mean;
        var = *state.running_var;
    }

    std::vector<double> inv_std(C);
    for (size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

    Batch y(x.size());
    Batch xhat(x.size());
    for (size_t b = 0; b < x.size(); ++b) {
        xhat[b] = Tensor(x[b].h, x[b].w, C);
        y[b] = Tensor(x[b].h, x[b].w, C);
        for (size_t hw = 0; hw < x[b].h * x[b].w; ++hw)
            for (size_t c = 0; c < C; ++c) {
                const double xh = (x[b].data[hw * C + c] - mean[c]) * inv_std[c];
                xhat[b].data[hw * C + c] = xh;
                y[b].data[hw * C + c] = gamma[c] * xh + beta[c];
            }
    }
    if (cache) {
        cache->inv_std = std::move(inv_std);
        cache->xhat = std::move(xhat);
    }
    return y;
}

struct BatchNormGrads {
    std::vector<double> dgamma, dbeta;
    Batch dx;
};

// Backward through train-mode normalization (batch statistics are functions
// of x): dx = inv_std/m * (m*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat)).
inline BatchNormGrads batchnorm_backward(const Batch& dy, const BatchNormCache& cache,
                                         const std::vector<double>& gamma) {
    const size_t C = gamma.size();
    const double m = double(dy.size() * dy[0].h * dy[0].w);

    BatchNormGrads g;
    g.dgamma.assign(C, 0.0);
    g.dbeta.assign(C, 0.0);
    std::vector<double> sum_dxhat(C, 0.0), sum_dxhat_xhat(C, 0.0);
    for (size_t b = 0; b < dy.size(); ++b)
        for (size_t hw = 0; hw < dy[b].h * dy[b].w; ++hw)
            for (size_t c = 0; c < C; ++c) {
                const double d = dy[b].data[hw * C + c];
                const double xh = cache.xhat[b].data[hw * C + c];
                g.dgamma[c] += d * xh;
                g.dbeta[c] += d;
                const double dxh = d * gamma[c];
                sum_dxhat[c] += dxh;
                sum_dxhat_xhat[c] += dxh * xh;
            }

    g.dx.resize(dy.size());
    for (size_t b = 0; b < dy.size(); ++b) {
        g.dx[b] = Tensor(dy[b].h, dy[b].w, C);
        for (size_t hw = 0; hw < dy[b].h * dy[b].w; ++hw)
            for (size_t c = 0; c < C; ++c) {
                const double dxh = dy[b].data[hw * C + c] * gamma[c];
                const double xh = cache.xhat[b].data[hw * C + c];
                g.dx[b].data[hw * C + c] =
                    cache.inv_std[c] / m * (m * dxh - sum_dxhat[c] - xh * sum_dxhat_xhat[c]);
            }
    }
    return g;
}

// Infer-mode normalization of a single tensor against fixed statistics.
inline Tensor batchnorm_infer(const Tensor& x, const std::vector<double>& gamma,
                              const std::vector<double>& beta, const std::vector<double>& mean,
                              const std::vector<double>& var, double eps = 1e-3) {
    Tensor y(x.h, x.w, x.c);
    for (size_t hw = 0; hw < x.h * x.w; ++hw)
        for (size_t c = 0; c < x.c; ++c)
            y.data[hw * x.c + c] =
                gamma[c] * (x.data[hw * x.c + c] - mean[c]) / std::sqrt(var[c] + eps) + beta[c];
    return y;
}

// ---------------------------------------------------- channel attention
// Gate per channel: M = sigmoid(MLP(maxpool(F)) + MLP(avgpool(F))) with a
// shared two-layer MLP; F' = M[c] * F. w1: (C x C/r), w2: (C/r x C).

struct ChannelAttentionCache {
    std::vector<double> d_max, d_avg;
    std::vector<size_t> argmax;  // flat (h*W+w) winner per channel
    std::vector<double> a1_max, a1_avg;  // hidden pre-activations
    std::vector<double> h1_max, h1_avg;  // hidden post-ReLU
    std::vector<double> gate;
    Tensor input;
};

namespace detail {

inline void ca_mlp(const std::vector<double>& d, const Matrix& w1, const std::vector<double>& b1,
                   const Matrix& w2, const std::vector<double>& b2, std::vector<double>& a1,
                   std::vector<double>& h1, std::vector<double>& out) {
    const size_t C = w1.rows, R = w1.cols;
    a1.assign(R, 0.0);
    for (size_t j = 0; j < R; ++j) {
        double acc = b1[j];
        for (size_t c = 0; c < C; ++c) acc += d[c] * w1.at(c, j);
        a1[j] = acc;
    }
    h1.resize(R);
    for (size_t j = 0; j < R; ++j) h1[j] = a1[j] > 0.0 ? a1[j] : 0.0;
    out.assign(C, 0.0);
    for (size_t c = 0; c < C; ++c) {
        double acc = b2[c];
        for (size_t j = 0; j < R; ++j) acc += h1[j] * w2.at(j, c);
        out[c] = acc;
    }
}

}  // namespace detail

inline Tensor channel_attention_forward(const Tensor& f, const Matrix& w1,
                                        const std::vector<double>& b1, const Matrix& w2,
                                        const std::vector<double>& b2,
                                        ChannelAttentionCache* cache = nullptr) {
    const size_t C = f.c;
    if (w1.rows != C || w2.cols != C || w1.cols != w2.rows || b1.size() != w1.cols ||
        b2.size() != C)
        throw Error("channel attention: parameter shapes inconsistent with " +
                    std::to_string(C) + " channels");

    std::vector<double> d_max(C, -std::numeric_limits<double>::infinity());
    std::vector<double> d_avg(C, 0.0);
    std::vector<size_t> argmax(C, 0);
    const size_t HW = f.h * f.w;
    for (size_t hw = 0; hw < HW; ++hw)
        for (size_t c = 0; c < C; ++c) {
            const double v = f.data[hw * C + c];
            d_avg[c] += v;
            if (v > d_max[c]) {
                d_max[c] = v;
                argmax[c] = hw;
            }
        }
    for (double& v : d_avg) v /= double(HW);

    std::vector<double> a1m, h1m, outm, a1a, h1a, outa;
    detail::ca_mlp(d_max, w1, b1, w2, b2, a1m, h1m, outm);
    detail::ca_mlp(d_avg, w1, b1, w2, b2, a1a, h1a, outa);

    std::vector<double> gate(C);
    for (size_t c = 0; c < C; ++c) gate[c] = 1.0 / (1.0 + std::exp(-(outm[c] + outa[c])));

    Tensor y(f.h, f.w, C);
    for (size_t hw = 0; hw < HW; ++hw)
        for (size_t c = 0; c < C; ++c) y.data[hw * C + c] = gate[c] * f.data[hw * C + c];

    if (cache) {
        cache->d_max = std::move(d_max);
        cache->d_avg = std::move(d_avg);
        cache->argmax = std::move(argmax);
        cache->a1_max = std::move(a1m);
        cache->a1_avg = std::move(a1a);
        cache->h1_max = std::move(h1m);
        cache->h1_avg = std::move(h1a);
        cache->gate = std::move(gate);
        cache->input = f;
    }
    return y;
}

struct ChannelAttentionGrads {
    Matrix dw1;
    std::vector<double> db1;
    Matrix dw2;
    std::vector<double> db2;
    Tensor dx;
};

inline ChannelAttentionGrads channel_attention_backward(const Tensor& dy,
                                                        const ChannelAttentionCache& cache,
                                                        const Matrix& w1, const Matrix& w2) {
    const size_t C = w1.rows, R = w1.cols;
    const Tensor& f = cache.input;
    const size_t HW = f.h * f.w;

    ChannelAttentionGrads g;
    g.dw1 = Matrix(C, R);
    g.db1.assign(R, 0.0);
    g.dw2 = Matrix(R, C);
    g.db2.assign(C, 0.0);
    g.dx = Tensor(f.h, f.w, C);

    // Gate product path: dgate accumulates, dx gets the scaled upstream grad.
    std::vector<double> dgate(C, 0.0);
    for (size_t hw = 0; hw < HW; ++hw)
        for (size_t c = 0; c < C; ++c) {
            const double d = dy.data[hw * C + c];
            dgate[c] += d * f.data[hw * C + c];
            g.dx.data[hw * C + c] = d * cache.gate[c];
        }

    // Sigmoid of the summed MLP outputs: both branches see the same ds.
    std::vector<double> ds(C);
    for (size_t c = 0; c < C; ++c) ds[c] = dgate[c] * cache.gate[c] * (1.0 - cache.gate[c]);

    std::vector<double> dd_max(C, 0.0), dd_avg(C, 0.0);
    auto backprop_branch = [&](const std::vector<double>& d_in, const std::vector<double>& a1,
                               const std::vector<double>& h1, std::vector<double>& dd) {
        std::vector<double> dh1(R, 0.0);
        for (size_t c = 0; c < C; ++c) {
            g.db2[c] += ds[c];
            for (size_t j = 0; j < R; ++j) {
                g.dw2.at(j, c) += h1[j] * ds[c];
                dh1[j] += w2.at(j, c) * ds[c];
            }
        }
        for (size_t j = 0; j < R; ++j) {
            const double da1 = a1[j] > 0.0 ? dh1[j] : 0.0;
            g.db1[j] += da1;
            for (size_t c = 0; c < C; ++c) {
                g.dw1.at(c, j) += d_in[c] * da1;
                dd[c] += w1.at(c, j) * da1;
            }
        }
    };
    backprop_branch(cache.d_max, cache.a1_max, cache.h1_max, dd_max);
    backprop_branch(cache.d_avg, cache.a1_avg, cache.h1_avg, dd_avg);

    // Pooling paths: average spreads uniformly, max routes to the winner.
    for (size_t hw = 0; hw < HW; ++hw)
        for (size_t c = 0; c < C; ++c) g.dx.data[hw * C + c] += dd_avg[c] / double(HW);
    for (size_t c = 0; c < C; ++c) g.dx.data[cache.argmax[c] * C + c] += dd_max[c];
    return g;
}

// ------------------------------------------------------------ pooling

struct MaxPoolCache {
    std::vector<size_t> argmax;  // flat input index per output element
    size_t in_h = 0, in_w = 0, channels = 0;
};

// 2x2 window, stride 2, floor semantics: a trailing odd row/column is
// dropped.
inline Tensor maxpool2d(const Tensor& x, MaxPoolCache* cache = nullptr) {
    if (x.h < 2 || x.w < 2)
        throw Error("maxpool2d: spatial dimensions must be >= 2, got " + x.shape_str());
    const size_t oh = x.h / 2, ow = x.w / 2;
    Tensor y(oh, ow, x.c);
    std::vector<size_t> argmax(oh * ow * x.c);
    for (size_t h = 0; h < oh; ++h)
        for (size_t w = 0; w < ow; ++w)
            for (size_t c = 0; c < x.c; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                size_t best_idx = 0;
                for (size_t dh = 0; dh < 2; ++dh)
                    for (size_t dw = 0; dw < 2; ++dw) {
                        const size_t idx = ((2 * h + dh) * x.w + (2 * w + dw)) * x.c + c;
                        if (x.data[idx] > best) {
                            best = x.data[idx];
                            best_idx = idx;
                        }
                    }
                y.at(h, w, c) = best;
                argmax[(h * ow + w) * x.c + c] = best_idx;
            }
    if (cache) {
        cache->argmax = std::move(argmax);
        cache->in_h = x.h;
        cache->in_w = x.w;
        cache->channels = x.c;
    }
    return y;
}

inline Tensor maxpool2d_backward(const Tensor& dy, const MaxPoolCache& cache) {
    Tensor dx(cache.in_h, cache.in_w, cache.channels);
    for (size_t i = 0; i < dy.data.size(); ++i) dx.data[cache.argmax[i]] += dy.data[i];
    return dx;
}

inline std::vector<double> global_avg_pool(const Tensor& x) {
    std::vector<double> v(x.c, 0.0);
    const size_t HW = x.h * x.w;
    for (size_t hw = 0; hw < HW; ++hw)
        for (size_t c = 0; c < x.c; ++c) v[c] += x.data[hw * x.c + c];
    for (double& e : v) e /= double(HW);
    return v;
}

inline Tensor global_avg_pool_backward(const std::vector<double>& dv, size_t h, size_t w) {
    Tensor dx(h, w, dv.size());
    const double scale = 1.0 / double(h * w);
    for (size_t hw = 0; hw < h * w; ++hw)
        for (size_t c = 0; c < dv.size(); ++c) dx.data[hw * dv.size() + c] = dv[c] * scale;
    return dx;
}

// ------------------------------------------------------ dense + softmax

inline std::vector<double> dense_forward(const std::vector<double>& x, const Matrix& w,
                                         const std::vector<double>& b) {
    if (w.rows != x.size()) throw Error("dense: weight rows != input length");
    if (w.cols != b.size()) throw Error("dense: bias length mismatch");
    std::vector<double> y(b);
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t o = 0; o < w.cols; ++o) y[o] += x[i] * w.at(i, o);
    return y;
}

struct DenseGrads {
    Matrix dw;
    std::vector<double> db, dx;
};

inline DenseGrads dense_backward(const std::vector<double>& x, const Matrix& w,
                                 const std::vector<double>& dy) {
    DenseGrads g;
    g.dw = Matrix(w.rows, w.cols);
    g.db = dy;
    g.dx.assign(x.size(), 0.0);
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t o = 0; o < w.cols; ++o) {
            g.dw.at(i, o) = x[i] * dy[o];
            g.dx[i] += w.at(i, o) * dy[o];
        }
    return g;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

// ----------------------------------------------------- split / concat

// Halves along the frequency (first) axis: low = rows 0..H/2-1.
inline std::pair<Tensor, Tensor> split_frequency(const Tensor& x) {
    if (x.h % 2 != 0)
        throw Error("split_frequency: height must be even, got " + std::to_string(x.h));
    const size_t half = x.h / 2;
    Tensor low(half, x.w, x.c), high(half, x.w, x.c);
    const size_t row = x.w * x.c;
    std::copy_n(x.data.begin(), half * row, low.data.begin());
    std::copy_n(x.data.begin() + long(half * row), half * row, high.data.begin());
    return {std::move(low), std::move(high)};
}

inline Tensor concat_frequency(const Tensor& low, const Tensor& high) {
    if (low.w != high.w || low.c != high.c)
        throw Error("concat_frequency: shapes differ (" + low.shape_str() + " vs " +
                    high.shape_str() + ")");
    Tensor out(low.h + high.h, low.w, low.c);
    std::copy(low.data.begin(), low.data.end(), out.data.begin());
    std::copy(high.data.begin(), high.data.end(), out.data.begin() + long(low.data.size()));
    return out;
}

}  // namespace lasc::nn
