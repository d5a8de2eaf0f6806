// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lasc/common.hpp"
#include "lasc/layers.hpp"
#include "lasc/tensor.hpp"

namespace lasc::nn {

// One inverted residual block: expand 1x1 -> BN -> ReLU -> depthwise 3x3 ->
// BN -> ReLU -> project 1x1 -> BN -> channel attention -> skip (when the
// input and output shapes match) -> optional 2x2 max pool.
struct BlockSpec {
    size_t expand = 0;
    size_t out = 0;
    bool use_ca = true;
    bool pool = false;
};

struct NetworkConfig {
    size_t input_h = 128, input_w = 423, input_c = 3;
    std::vector<BlockSpec> pathway_blocks;  // same structure in both pathways
    BlockSpec trunk;
    size_t ca_ratio = 4;
    size_t class_count = 10;
    double bn_eps = 1e-3;
    double bn_momentum = 0.99;

    // Channel count entering the trunk block (pathway outputs are stacked
    // along frequency, so channels are unchanged by the concat).
    size_t trunk_in_channels() const {
        return pathway_blocks.empty() ? input_c : pathway_blocks.back().out;
    }

    void validate() const {
        if (class_count != 10) throw Error("network config: class_count must be 10");
        if (input_h % 2 != 0) throw Error("network config: input height must split evenly");
        if (pathway_blocks.empty()) throw Error("network config: need at least one pathway block");
        auto check_block = [&](const BlockSpec& b, const std::string& what) {
            if (b.expand == 0 || b.out == 0) throw Error("network config: zero channels in " + what);
            if (b.use_ca && b.out % ca_ratio != 0)
                throw Error("network config: attention ratio " + std::to_string(ca_ratio) +
                            " does not divide " + std::to_string(b.out) + " in " + what);
        };
        size_t h = input_h / 2, w = input_w;
        for (size_t i = 0; i < pathway_blocks.size(); ++i) {
            check_block(pathway_blocks[i], "pathway block " + std::to_string(i));
            if (pathway_blocks[i].pool) {
                if (h < 2 || w < 2)
                    throw Error("network config: pathway block " + std::to_string(i) +
                                " pools a dimension below 2");
                h /= 2;
                w /= 2;
            }
        }
        h *= 2;  // concat
        if (h < 2 || w < 2) throw Error("network config: mid pooling needs dimensions >= 2");
        h /= 2;
        w /= 2;
        check_block(trunk, "trunk block");
        if (trunk.pool) {
            if (h < 2 || w < 2) throw Error("network config: trunk pool needs dimensions >= 2");
            h /= 2;
            w /= 2;
        }
        if (h < 1 || w < 1) throw Error("network config: feature map collapsed to zero");
    }

    // Reconstruction of the published architecture: three blocks per pathway
    // with a pool after each, one trunk block, attention everywhere.
    static NetworkConfig paper() {
        NetworkConfig c;
        c.input_h = 128;
        c.input_w = 423;
        c.input_c = 3;
        c.pathway_blocks = {{16, 16, true, true}, {32, 24, true, true}, {48, 32, true, true}};
        c.trunk = {64, 48, true, false};
        c.ca_ratio = 4;
        return c;
    }

    // Small configuration for tests: one 4-channel block per pathway.
    static NetworkConfig tiny() {
        NetworkConfig c;
        c.input_h = 8;
        c.input_w = 16;
        c.input_c = 3;
        c.pathway_blocks = {{8, 4, true, true}};
        c.trunk = {12, 8, true, false};
        c.ca_ratio = 2;
        return c;
    }
};

enum class DType : uint8_t { kF32 = 0, kT16 = 1 };

struct ParamTensor {
    std::string name;
    std::vector<size_t> shape;
    std::vector<double> values;
    DType dtype = DType::kF32;
    bool trainable = true;

    size_t numel() const {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return n;
    }
};

// Ordered, named weight collection. Order is the serialization order and the
// optimizer slot order.
struct ModelParams {
    std::vector<ParamTensor> tensors;

    bool has(std::string_view name) const {
        for (const auto& t : tensors)
            if (t.name == name) return true;
        return false;
    }
    ParamTensor& at(std::string_view name) {
        for (auto& t : tensors)
            if (t.name == name) return t;
        throw Error("model has no tensor named '" + std::string(name) + "'");
    }
    const ParamTensor& at(std::string_view name) const {
        for (const auto& t : tensors)
            if (t.name == name) return t;
        throw Error("model has no tensor named '" + std::string(name) + "'");
    }
};

inline bool is_running_stat(std::string_view name) {
    return name.ends_with(".mean") || name.ends_with(".var");
}

// Non-zero entries (include_zeros=false) or raw entries of every tensor.
inline size_t count_parameters(const ModelParams& params, bool include_zeros) {
    size_t n = 0;
    for (const auto& t : params.tensors)
        if (include_zeros)
            n += t.values.size();
        else
            for (double v : t.values) n += v != 0.0;
    return n;
}

namespace detail {

inline void add_tensor(ModelParams& p, std::string name, std::vector<size_t> shape, double fill,
                       bool trainable = true) {
    ParamTensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.values.assign(t.numel(), fill);
    t.trainable = trainable;
    p.tensors.push_back(std::move(t));
}

inline void add_glorot(ModelParams& p, std::string name, std::vector<size_t> shape, size_t fan_in,
                       size_t fan_out, std::mt19937_64& rng) {
    ParamTensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    t.values.resize(t.numel());
    for (double& v : t.values) v = dist(rng);
    p.tensors.push_back(std::move(t));
}

inline void add_bn(ModelParams& p, const std::string& prefix, size_t c) {
    add_tensor(p, prefix + ".gamma", {c}, 1.0);
    add_tensor(p, prefix + ".beta", {c}, 0.0);
    add_tensor(p, prefix + ".mean", {c}, 0.0, false);
    add_tensor(p, prefix + ".var", {c}, 1.0, false);
}

inline void add_block(ModelParams& p, const std::string& prefix, size_t in, const BlockSpec& spec,
                      size_t ca_ratio, std::mt19937_64& rng) {
    add_glorot(p, prefix + "pw1.w", {in, spec.expand}, in, spec.expand, rng);
    add_tensor(p, prefix + "pw1.b", {spec.expand}, 0.0);
    add_bn(p, prefix + "bn1", spec.expand);
    add_glorot(p, prefix + "dw.w", {3, 3, spec.expand}, 9, 9, rng);
    add_tensor(p, prefix + "dw.b", {spec.expand}, 0.0);
    add_bn(p, prefix + "bn2", spec.expand);
    add_glorot(p, prefix + "pw2.w", {spec.expand, spec.out}, spec.expand, spec.out, rng);
    add_tensor(p, prefix + "pw2.b", {spec.out}, 0.0);
    add_bn(p, prefix + "bn3", spec.out);
    if (spec.use_ca) {
        const size_t r = spec.out / ca_ratio;
        add_glorot(p, prefix + "ca.w1", {spec.out, r}, spec.out, r, rng);
        add_tensor(p, prefix + "ca.b1", {r}, 0.0);
        add_glorot(p, prefix + "ca.w2", {r, spec.out}, r, spec.out, rng);
        add_tensor(p, prefix + "ca.b2", {spec.out}, 0.0);
    }
}

}  // namespace detail

// Glorot-uniform weights, identity batch norm, zero biases. Running BN
// statistics start at mean 0 / var 1 and count as initialized.
inline ModelParams init_params(const NetworkConfig& cfg, uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ModelParams p;
    for (int path = 0; path < 2; ++path) {
        size_t in = cfg.input_c;
        for (size_t i = 0; i < cfg.pathway_blocks.size(); ++i) {
            const std::string prefix =
                "p" + std::to_string(path) + ".b" + std::to_string(i) + ".";
            detail::add_block(p, prefix, in, cfg.pathway_blocks[i], cfg.ca_ratio, rng);
            in = cfg.pathway_blocks[i].out;
        }
    }
    detail::add_block(p, "trunk.", cfg.trunk_in_channels(), cfg.trunk, cfg.ca_ratio, rng);
    detail::add_glorot(p, "fc.w", {cfg.trunk.out, cfg.class_count}, cfg.trunk.out,
                       cfg.class_count, rng);
    detail::add_tensor(p, "fc.b", {cfg.class_count}, 0.0);
    return p;
}

// Same names/shapes, all values zero. Used for gradient accumulation.
inline ModelParams zero_like(const ModelParams& params) {
    ModelParams g = params;
    for (auto& t : g.tensors) std::fill(t.values.begin(), t.values.end(), 0.0);
    return g;
}

// ------------------------------------------------------------- forward

struct BlockCache {
    Batch input;
    BatchNormCache bn1, bn2, bn3;
    Batch pre_relu1, pre_relu2;  // BN outputs feeding the ReLUs
    Batch conv2_in, conv3_in;    // ReLU outputs feeding dw and pw2
    std::vector<ChannelAttentionCache> ca;
    bool skip = false;
    std::vector<MaxPoolCache> pool;
};

namespace detail {

inline Matrix as_matrix(const ParamTensor& t) {
    if (t.shape.size() != 2) throw Error("tensor '" + t.name + "' is not a matrix");
    Matrix m(t.shape[0], t.shape[1]);
    m.v = t.values;
    return m;
}

inline Tensor as_tensor3(const ParamTensor& t) {
    if (t.shape.size() != 3) throw Error("tensor '" + t.name + "' is not rank-3");
    Tensor x(t.shape[0], t.shape[1], t.shape[2]);
    x.data = t.values;
    return x;
}

}  // namespace detail

// Forward through one block for a whole batch. In train mode the BN running
// statistics inside params are updated; cache captures what backward needs.
inline Batch inverted_residual_forward(const Batch& x, ModelParams& params,
                                       const std::string& prefix, const BlockSpec& spec,
                                       const NetworkConfig& cfg, Mode mode,
                                       BlockCache* cache = nullptr) {
    const Matrix pw1 = detail::as_matrix(params.at(prefix + "pw1.w"));
    const std::vector<double>& pw1_b = params.at(prefix + "pw1.b").values;
    const Tensor dw = detail::as_tensor3(params.at(prefix + "dw.w"));
    const std::vector<double>& dw_b = params.at(prefix + "dw.b").values;
    const Matrix pw2 = detail::as_matrix(params.at(prefix + "pw2.w"));
    const std::vector<double>& pw2_b = params.at(prefix + "pw2.b").values;

    auto bn = [&](const Batch& in, const std::string& bn_name, BatchNormCache* bn_cache) {
        BatchNormState state{&params.at(prefix + bn_name + ".mean").values,
                             &params.at(prefix + bn_name + ".var").values, true};
        return batchnorm_forward(in, params.at(prefix + bn_name + ".gamma").values,
                                 params.at(prefix + bn_name + ".beta").values, mode, state,
                                 bn_cache, cfg.bn_eps, cfg.bn_momentum);
    };

    if (cache) cache->input = x;

    Batch a1(x.size());
    for (size_t b = 0; b < x.size(); ++b) a1[b] = pointwise_conv_forward(x[b], pw1, pw1_b);
    Batch b1 = bn(a1, "bn1", cache ? &cache->bn1 : nullptr);
    Batch r1(b1.size());
    for (size_t b = 0; b < b1.size(); ++b) r1[b] = relu_forward(b1[b]);
    if (cache) {
        cache->pre_relu1 = b1;
        cache->conv2_in = r1;
    }

    Batch a2(r1.size());
    for (size_t b = 0; b < r1.size(); ++b) a2[b] = depthwise_conv_forward(r1[b], dw, dw_b);
    Batch b2 = bn(a2, "bn2", cache ? &cache->bn2 : nullptr);
    Batch r2(b2.size());
    for (size_t b = 0; b < b2.size(); ++b) r2[b] = relu_forward(b2[b]);
    if (cache) {
        cache->pre_relu2 = b2;
        cache->conv3_in = r2;
    }

    Batch a3(r2.size());
    for (size_t b = 0; b < r2.size(); ++b) a3[b] = pointwise_conv_forward(r2[b], pw2, pw2_b);
    Batch z = bn(a3, "bn3", cache ? &cache->bn3 : nullptr);

    if (spec.use_ca) {
        if (cache) cache->ca.resize(z.size());
        const Matrix w1 = detail::as_matrix(params.at(prefix + "ca.w1"));
        const std::vector<double>& b1v = params.at(prefix + "ca.b1").values;
        const Matrix w2 = detail::as_matrix(params.at(prefix + "ca.w2"));
        const std::vector<double>& b2v = params.at(prefix + "ca.b2").values;
        for (size_t b = 0; b < z.size(); ++b)
            z[b] = channel_attention_forward(z[b], w1, b1v, w2, b2v,
                                             cache ? &cache->ca[b] : nullptr);
    }

    const bool skip = z[0].same_shape(x[0]);
    if (cache) cache->skip = skip;
    if (skip)
        for (size_t b = 0; b < z.size(); ++b)
            for (size_t i = 0; i < z[b].data.size(); ++i) z[b].data[i] += x[b].data[i];

    if (spec.pool) {
        if (cache) cache->pool.resize(z.size());
        for (size_t b = 0; b < z.size(); ++b)
            z[b] = maxpool2d(z[b], cache ? &cache->pool[b] : nullptr);
    }
    return z;
}

struct ForwardCache {
    Batch input;
    std::vector<BlockCache> path[2];
    std::vector<MaxPoolCache> mid_pool;
    BlockCache trunk;
    size_t gap_h = 0, gap_w = 0;
    std::vector<std::vector<double>> gap_out;
    std::vector<std::vector<double>> probs;
};

// Two-pathway forward: split along frequency, run each half through its
// pathway stack, stack the outputs back, pool, trunk block, GAP, dense,
// softmax. Returns one probability vector per sample.
inline std::vector<std::vector<double>> network_forward_batch(const Batch& batch,
                                                              ModelParams& params,
                                                              const NetworkConfig& cfg, Mode mode,
                                                              ForwardCache* cache = nullptr) {
    if (batch.empty()) throw Error("network forward: empty batch");
    for (const Tensor& t : batch)
        if (t.h != cfg.input_h || t.w != cfg.input_w || t.c != cfg.input_c)
            throw Error("network forward: input " + t.shape_str() + " does not match config " +
                        Tensor(cfg.input_h, cfg.input_w, cfg.input_c).shape_str());
    if (cache) cache->input = batch;

    Batch half[2];
    half[0].reserve(batch.size());
    half[1].reserve(batch.size());
    for (const Tensor& t : batch) {
        auto [low, high] = split_frequency(t);
        half[0].push_back(std::move(low));
        half[1].push_back(std::move(high));
    }

    for (int p = 0; p < 2; ++p) {
        if (cache) cache->path[p].resize(cfg.pathway_blocks.size());
        for (size_t i = 0; i < cfg.pathway_blocks.size(); ++i) {
            const std::string prefix = "p" + std::to_string(p) + ".b" + std::to_string(i) + ".";
            half[p] = inverted_residual_forward(half[p], params, prefix, cfg.pathway_blocks[i],
                                                cfg, mode, cache ? &cache->path[p][i] : nullptr);
        }
    }

    Batch merged(batch.size());
    for (size_t b = 0; b < batch.size(); ++b)
        merged[b] = concat_frequency(half[0][b], half[1][b]);

    if (cache) cache->mid_pool.resize(merged.size());
    for (size_t b = 0; b < merged.size(); ++b)
        merged[b] = maxpool2d(merged[b], cache ? &cache->mid_pool[b] : nullptr);

    merged = inverted_residual_forward(merged, params, "trunk.", cfg.trunk, cfg, mode,
                                       cache ? &cache->trunk : nullptr);

    const Matrix fc_w = detail::as_matrix(params.at("fc.w"));
    const std::vector<double>& fc_b = params.at("fc.b").values;
    std::vector<std::vector<double>> probs(merged.size());
    if (cache) {
        cache->gap_h = merged[0].h;
        cache->gap_w = merged[0].w;
        cache->gap_out.resize(merged.size());
    }
    for (size_t b = 0; b < merged.size(); ++b) {
        std::vector<double> v = global_avg_pool(merged[b]);
        if (cache) cache->gap_out[b] = v;
        probs[b] = softmax(dense_forward(v, fc_w, fc_b));
    }
    if (cache) cache->probs = probs;
    return probs;
}

// Single-sample convenience wrapper.
inline std::vector<double> network_forward(const Tensor& feature, ModelParams& params,
                                           const NetworkConfig& cfg, Mode mode) {
    return network_forward_batch({feature}, params, cfg, mode).front();
}

// ------------------------------------------------------------ backward

namespace detail {

inline Batch inverted_residual_backward(const Batch& dout, const BlockCache& cache,
                                        const ModelParams& params, const std::string& prefix,
                                        const BlockSpec& spec, ModelParams& grads) {
    auto acc = [&grads](const std::string& name, const std::vector<double>& g) {
        auto& dst = grads.at(name).values;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    };

    Batch dz = dout;
    if (spec.pool)
        for (size_t b = 0; b < dz.size(); ++b) dz[b] = maxpool2d_backward(dz[b], cache.pool[b]);

    Batch dskip;
    if (cache.skip) dskip = dz;  // identity branch

    if (spec.use_ca) {
        const Matrix w1 = as_matrix(params.at(prefix + "ca.w1"));
        const Matrix w2 = as_matrix(params.at(prefix + "ca.w2"));
        for (size_t b = 0; b < dz.size(); ++b) {
            auto g = channel_attention_backward(dz[b], cache.ca[b], w1, w2);
            acc(prefix + "ca.w1", g.dw1.v);
            acc(prefix + "ca.b1", g.db1);
            acc(prefix + "ca.w2", g.dw2.v);
            acc(prefix + "ca.b2", g.db2);
            dz[b] = std::move(g.dx);
        }
    }

    auto bn_back = [&](Batch& d, const BatchNormCache& c, const std::string& bn_name) {
        auto g = batchnorm_backward(d, c, params.at(prefix + bn_name + ".gamma").values);
        acc(prefix + bn_name + ".gamma", g.dgamma);
        acc(prefix + bn_name + ".beta", g.dbeta);
        d = std::move(g.dx);
    };

    bn_back(dz, cache.bn3, "bn3");

    const Matrix pw2 = as_matrix(params.at(prefix + "pw2.w"));
    for (size_t b = 0; b < dz.size(); ++b) {
        auto g = pointwise_conv_backward(cache.conv3_in[b], pw2, dz[b]);
        acc(prefix + "pw2.w", g.dkernel.v);
        acc(prefix + "pw2.b", g.dbias);
        dz[b] = std::move(g.dx);
    }

    for (size_t b = 0; b < dz.size(); ++b) dz[b] = relu_backward(dz[b], cache.pre_relu2[b]);
    bn_back(dz, cache.bn2, "bn2");

    const Tensor dw = as_tensor3(params.at(prefix + "dw.w"));
    for (size_t b = 0; b < dz.size(); ++b) {
        auto g = depthwise_conv_backward(cache.conv2_in[b], dw, dz[b]);
        acc(prefix + "dw.w", g.dkernel.data);
        acc(prefix + "dw.b", g.dbias);
        dz[b] = std::move(g.dx);
    }

    for (size_t b = 0; b < dz.size(); ++b) dz[b] = relu_backward(dz[b], cache.pre_relu1[b]);
    bn_back(dz, cache.bn1, "bn1");

    const Matrix pw1 = as_matrix(params.at(prefix + "pw1.w"));
    for (size_t b = 0; b < dz.size(); ++b) {
        auto g = pointwise_conv_backward(cache.input[b], pw1, dz[b]);
        acc(prefix + "pw1.w", g.dkernel.v);
        acc(prefix + "pw1.b", g.dbias);
        dz[b] = std::move(g.dx);
    }

    if (cache.skip)
        for (size_t b = 0; b < dz.size(); ++b)
            for (size_t i = 0; i < dz[b].data.size(); ++i) dz[b].data[i] += dskip[b].data[i];
    return dz;
}

}  // namespace detail

struct NetworkGrads {
    ModelParams params;  // same names/shapes as the model, zero off-path
    Batch input;
};

// Gradients of the mean categorical cross-entropy over the batch, for every
// parameter tensor and the input. Needs the cache of a train-mode forward.
inline NetworkGrads network_backward_from_cache(const ForwardCache& cache,
                                                const std::vector<std::vector<double>>& targets,
                                                const ModelParams& params,
                                                const NetworkConfig& cfg) {
    if (cache.probs.empty()) throw Error("network backward: missing cached forward intermediates");
    if (targets.size() != cache.probs.size())
        throw Error("network backward: target count != batch size");

    const size_t n = cache.probs.size();
    NetworkGrads out;
    out.params = zero_like(params);

    const Matrix fc_w = detail::as_matrix(params.at("fc.w"));
    Batch dtrunk(n);
    for (size_t b = 0; b < n; ++b) {
        // Softmax + cross-entropy collapse to (p - y), scaled by 1/batch.
        std::vector<double> dlogits(cache.probs[b].size());
        for (size_t c = 0; c < dlogits.size(); ++c)
            dlogits[c] = (cache.probs[b][c] - targets[b][c]) / double(n);
        auto g = dense_backward(cache.gap_out[b], fc_w, dlogits);
        auto& dw = out.params.at("fc.w").values;
        for (size_t i = 0; i < dw.size(); ++i) dw[i] += g.dw.v[i];
        auto& db = out.params.at("fc.b").values;
        for (size_t i = 0; i < db.size(); ++i) db[i] += g.db[i];
        dtrunk[b] = global_avg_pool_backward(g.dx, cache.gap_h, cache.gap_w);
    }

    dtrunk = detail::inverted_residual_backward(dtrunk, cache.trunk, params, "trunk.", cfg.trunk,
                                                out.params);

    for (size_t b = 0; b < n; ++b)
        dtrunk[b] = maxpool2d_backward(dtrunk[b], cache.mid_pool[b]);

    Batch dhalf[2];
    dhalf[0].resize(n);
    dhalf[1].resize(n);
    for (size_t b = 0; b < n; ++b) {
        auto [dlow, dhigh] = split_frequency(dtrunk[b]);
        dhalf[0][b] = std::move(dlow);
        dhalf[1][b] = std::move(dhigh);
    }

    for (int p = 0; p < 2; ++p)
        for (size_t i = cfg.pathway_blocks.size(); i-- > 0;) {
            const std::string prefix = "p" + std::to_string(p) + ".b" + std::to_string(i) + ".";
            dhalf[p] = detail::inverted_residual_backward(dhalf[p], cache.path[p][i], params,
                                                          prefix, cfg.pathway_blocks[i],
                                                          out.params);
        }

    out.input.resize(n);
    for (size_t b = 0; b < n; ++b) out.input[b] = concat_frequency(dhalf[0][b], dhalf[1][b]);
    return out;
}

// Convenience form working on a copy of the params, so calling it has no
// side effects on running statistics.
inline NetworkGrads network_backward(const Batch& batch,
                                     const std::vector<std::vector<double>>& targets,
                                     const ModelParams& params, const NetworkConfig& cfg) {
    ModelParams scratch = params;
    ForwardCache cache;
    network_forward_batch(batch, scratch, cfg, Mode::kTrain, &cache);
    return network_backward_from_cache(cache, targets, params, cfg);
}

}  // namespace lasc::nn
