// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lasc/common.hpp"
#include "lasc/features.hpp"
#include "lasc/tensor.hpp"
#include "lasc/wav.hpp"

namespace lasc {

struct AugmentConfig {
    double alpha = 0.4;      // Beta parameter for mix-up
    size_t n_pairs = 150;    // spectra used per device response estimate
    std::vector<double> pitch_factors = {0.90, 0.95, 1.05, 1.10};
    double audiomix_low = 0.4;
    double audiomix_high = 0.6;
    std::vector<std::string> reference_devices;  // empty = all devices present

    void validate() const {
        if (alpha <= 0.0) throw Error("augment config: alpha must be > 0");
        if (n_pairs < 1) throw Error("augment config: n_pairs must be >= 1");
        for (double f : pitch_factors)
            if (f <= 0.0) throw Error("augment config: pitch factors must be > 0");
        if (!(0.0 <= audiomix_low && audiomix_low <= audiomix_high && audiomix_high <= 1.0))
            throw Error("augment config: need 0 <= low <= high <= 1 for audio-mix weights");
    }
};

// Per-frequency-bin magnitude response of one device.
struct DeviceResponse {
    std::string device;
    std::vector<double> response;
};

// lambda ~ Beta(alpha, alpha) via two Gamma(alpha, 1) draws. Degenerate draws
// are rejected so the result is strictly inside (0, 1).
inline double sample_beta(double alpha, std::mt19937_64& rng) {
    if (alpha <= 0.0) throw Error("sample_beta: alpha must be > 0");
    std::gamma_distribution<double> gamma(alpha, 1.0);
    for (;;) {
        const double g1 = gamma(rng);
        const double g2 = gamma(rng);
        if (g1 + g2 <= 0.0) continue;
        const double lambda = g1 / (g1 + g2);
        if (lambda > 0.0 && lambda < 1.0) return lambda;
    }
}

struct MixupResult {
    std::vector<Tensor> features;
    std::vector<std::vector<double>> labels;
    double lambda = 0.0;
};

// Batch-level mix-up with an explicit lambda: X' = l*Xi + (1-l)*Xj and the
// same convex combination on the label rows.
inline MixupResult mixup_batches(const std::vector<Tensor>& xi,
                                 const std::vector<std::vector<double>>& yi,
                                 const std::vector<Tensor>& xj,
                                 const std::vector<std::vector<double>>& yj, double lambda) {
    if (xi.size() != xj.size() || yi.size() != yj.size() || xi.size() != yi.size())
        throw Error("mixup: batch sizes differ");
    MixupResult r;
    r.lambda = lambda;
    r.features.reserve(xi.size());
    r.labels.reserve(yi.size());
    for (size_t i = 0; i < xi.size(); ++i) {
        if (!xi[i].same_shape(xj[i]))
            throw Error("mixup: feature shapes differ at batch index " + std::to_string(i));
        if (yi[i].size() != yj[i].size())
            throw Error("mixup: label shapes differ at batch index " + std::to_string(i));
        Tensor mixed = xi[i];
        for (size_t k = 0; k < mixed.data.size(); ++k)
            mixed.data[k] = lambda * xi[i].data[k] + (1.0 - lambda) * xj[i].data[k];
        std::vector<double> label(yi[i].size());
        for (size_t k = 0; k < label.size(); ++k)
            label[k] = lambda * yi[i][k] + (1.0 - lambda) * yj[i][k];
        r.features.push_back(std::move(mixed));
        r.labels.push_back(std::move(label));
    }
    return r;
}

// Draws one lambda per call (batch-level mixing of two loaded batches).
inline MixupResult mixup_batches(const std::vector<Tensor>& xi,
                                 const std::vector<std::vector<double>>& yi,
                                 const std::vector<Tensor>& xj,
                                 const std::vector<std::vector<double>>& yj, double alpha,
                                 std::mt19937_64& rng) {
    return mixup_batches(xi, yi, xj, yj, sample_beta(alpha, rng));
}

// Mean magnitude (sqrt of power) per bin over the first n_pairs spectrograms,
// pooling all frames equally.
inline DeviceResponse estimate_device_response(const std::vector<Spectrogram>& spectra,
                                               size_t n_pairs, std::string device_id = {}) {
    if (spectra.size() < n_pairs)
        throw Error("estimate_device_response: need " + std::to_string(n_pairs) +
                    " spectrograms, got " + std::to_string(spectra.size()));
    if (n_pairs == 0) throw Error("estimate_device_response: n_pairs must be >= 1");

    const size_t bins = spectra[0].rows;
    DeviceResponse out;
    out.device = std::move(device_id);
    out.response.assign(bins, 0.0);
    size_t total_frames = 0;
    for (size_t s = 0; s < n_pairs; ++s) {
        const Spectrogram& spec = spectra[s];
        if (spec.rows != bins)
            throw Error("estimate_device_response: spectrograms have mismatched bin counts");
        for (size_t k = 0; k < bins; ++k)
            for (size_t t = 0; t < spec.cols; ++t) out.response[k] += std::sqrt(spec.at(k, t));
        total_frames += spec.cols;
    }
    for (double& v : out.response) v /= double(total_frames);
    return out;
}

// Element-wise mean of several device responses (the reference device).
inline DeviceResponse mean_response(const std::vector<DeviceResponse>& responses) {
    if (responses.empty()) throw Error("mean_response: empty device set");
    const size_t bins = responses[0].response.size();
    DeviceResponse out;
    out.device = "reference";
    out.response.assign(bins, 0.0);
    for (const auto& r : responses) {
        if (r.response.size() != bins) throw Error("mean_response: mismatched response lengths");
        for (size_t k = 0; k < bins; ++k) out.response[k] += r.response[k];
    }
    for (double& v : out.response) v /= double(responses.size());
    return out;
}

// c[k] = reference[k] / max(device[k], eps), finite by construction.
inline std::vector<double> correction_coefficient(const DeviceResponse& reference,
                                                  const DeviceResponse& device) {
    if (reference.response.size() != device.response.size())
        throw Error("correction_coefficient: response length mismatch");
    std::vector<double> c(reference.response.size());
    for (size_t k = 0; k < c.size(); ++k)
        c[k] = reference.response[k] / std::max(device.response[k], kLogMelFloor);
    return c;
}

// The coefficient acts on magnitudes, so power bins scale by c^2.
inline Spectrogram apply_spectrum_correction(const Spectrogram& spec,
                                             const std::vector<double>& c) {
    if (c.size() != spec.rows)
        throw Error("apply_spectrum_correction: coefficient length " + std::to_string(c.size()) +
                    " != bin count " + std::to_string(spec.rows));
    Spectrogram out = spec;
    for (size_t k = 0; k < spec.rows; ++k)
        for (size_t t = 0; t < spec.cols; ++t) out.at(k, t) = c[k] * c[k] * spec.at(k, t);
    return out;
}

// Resamples by linear interpolation at positions i*factor, then crops or
// replicate-pads back to the original length. The header sample rate stays
// put, so the perceived pitch scales by the factor.
inline AudioClip pitch_shift(const AudioClip& clip, double factor) {
    if (factor <= 0.0) throw Error("pitch_shift: factor must be > 0");
    const size_t n = clip.samples.size();
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.resize(n);
    if (n == 0) return out;

    const double last = double(n - 1);
    double tail = clip.samples[0];
    for (size_t i = 0; i < n; ++i) {
        const double pos = double(i) * factor;
        if (pos > last) {
            out.samples[i] = tail;  // replicate-pad past the end
            continue;
        }
        const size_t i0 = size_t(pos);
        const double frac = pos - double(i0);
        const double a = clip.samples[i0];
        const double b = clip.samples[std::min(i0 + 1, n - 1)];
        out.samples[i] = a + frac * (b - a);
        tail = out.samples[i];
    }
    return out;
}

// Convex same-class mix with an explicit weight.
inline AudioClip audio_mix_weighted(const AudioClip& a, const AudioClip& b, double w) {
    if (a.samples.size() != b.samples.size())
        throw Error("audio_mix: clip lengths differ");
    if (a.sample_rate != b.sample_rate) throw Error("audio_mix: sample rates differ");
    AudioClip out;
    out.sample_rate = a.sample_rate;
    out.samples.resize(a.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i)
        out.samples[i] = w * a.samples[i] + (1.0 - w) * b.samples[i];
    return out;
}

// Mixes two clips of the same acoustic scene with a weight drawn uniformly
// from [low, high]. Cross-class mixing is a precondition violation.
inline AudioClip audio_mix(const AudioClip& a, const AudioClip& b, std::string_view label_a,
                           std::string_view label_b, std::mt19937_64& rng, double low = 0.4,
                           double high = 0.6) {
    if (label_a != label_b)
        throw Error("audio_mix: labels differ (" + std::string(label_a) + " vs " +
                    std::string(label_b) + "); this technique is same-class only");
    std::uniform_real_distribution<double> dist(low, high);
    return audio_mix_weighted(a, b, dist(rng));
}

}  // namespace lasc
