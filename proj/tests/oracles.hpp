// SPDX-License-Identifier: Apache-2.0
//
// Test-side oracles and fixtures. Everything here is a deliberately naive,
// straight-from-the-definition implementation kept independent of the
// library code it checks.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lasc/features.hpp"
#include "lasc/manifest.hpp"
#include "lasc/tensor.hpp"
#include "lasc/wav.hpp"

namespace oracles {

// ------------------------------------------------------------ DSP oracles

// O(n^2) DFT power spectrum of one frame, bins 0..n/2.
inline std::vector<double> dft_power(const std::vector<double>& frame) {
    const size_t n = frame.size();
    std::vector<double> power(n / 2 + 1);
    for (size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * std::numbers::pi * double(k) * double(t) / double(n);
            acc += frame[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        power[k] = std::norm(acc);
    }
    return power;
}

// Full-spectrum energy sum for Parseval checks: |X_0|^2 + |X_{N/2}|^2 +
// 2 * sum_{k=1}^{N/2-1} |X_k|^2 over the one-sided bins.
inline double onesided_energy(const std::vector<double>& bins) {
    double sum = bins.front() + bins.back();
    for (size_t k = 1; k + 1 < bins.size(); ++k) sum += 2.0 * bins[k];
    return sum;
}

// Regression delta evaluated directly from the formula with clamp padding.
inline double delta_at(const lasc::Matrix& m, size_t band, long t) {
    auto c = [&](long i) {
        if (i < 0) i = 0;
        if (i >= long(m.cols)) i = long(m.cols) - 1;
        return m.at(band, size_t(i));
    };
    return (1.0 * (c(t + 1) - c(t - 1)) + 2.0 * (c(t + 2) - c(t - 2))) / 10.0;
}

// ------------------------------------------------------------- NN oracles

// Quadruple-loop 1x1 convolution.
inline lasc::Tensor pointwise_oracle(const lasc::Tensor& x, const lasc::Matrix& k,
                                     const std::vector<double>& b) {
    lasc::Tensor y(x.h, x.w, k.cols);
    for (size_t h = 0; h < x.h; ++h)
        for (size_t w = 0; w < x.w; ++w)
            for (size_t o = 0; o < k.cols; ++o) {
                double acc = b[o];
                for (size_t i = 0; i < x.c; ++i) acc += x.at(h, w, i) * k.at(i, o);
                y.at(h, w, o) = acc;
            }
    return y;
}

// Loop depthwise 3x3, zero padding.
inline lasc::Tensor depthwise_oracle(const lasc::Tensor& x, const lasc::Tensor& k,
                                     const std::vector<double>& b) {
    lasc::Tensor y(x.h, x.w, x.c);
    for (long h = 0; h < long(x.h); ++h)
        for (long w = 0; w < long(x.w); ++w)
            for (size_t c = 0; c < x.c; ++c) {
                double acc = b[c];
                for (long dh = -1; dh <= 1; ++dh)
                    for (long dw = -1; dw <= 1; ++dw) {
                        const long ih = h + dh, iw = w + dw;
                        if (ih < 0 || ih >= long(x.h) || iw < 0 || iw >= long(x.w)) continue;
                        acc += x.at(size_t(ih), size_t(iw), c) *
                               k.at(size_t(dh + 1), size_t(dw + 1), c);
                    }
                y.at(size_t(h), size_t(w), c) = acc;
            }
    return y;
}

// Full (non-separable) 3x3 convolution with kernel k[dh][dw][i][o], zero
// padding, for the depthwise+pointwise equivalence check.
inline lasc::Tensor full_conv_oracle(const lasc::Tensor& x,
                                     const std::vector<std::vector<lasc::Matrix>>& k) {
    const size_t cout = k[0][0].cols;
    lasc::Tensor y(x.h, x.w, cout);
    for (long h = 0; h < long(x.h); ++h)
        for (long w = 0; w < long(x.w); ++w)
            for (size_t o = 0; o < cout; ++o) {
                double acc = 0.0;
                for (long dh = -1; dh <= 1; ++dh)
                    for (long dw = -1; dw <= 1; ++dw) {
                        const long ih = h + dh, iw = w + dw;
                        if (ih < 0 || ih >= long(x.h) || iw < 0 || iw >= long(x.w)) continue;
                        for (size_t i = 0; i < x.c; ++i)
                            acc += x.at(size_t(ih), size_t(iw), i) *
                                   k[size_t(dh + 1)][size_t(dw + 1)].at(i, o);
                    }
                y.at(size_t(h), size_t(w), o) = acc;
            }
    return y;
}

// Scalar batch-norm in inference form.
inline double bn_infer_scalar(double x, double mean, double var, double gamma, double beta,
                              double eps) {
    return gamma * (x - mean) / std::sqrt(var + eps) + beta;
}

// ------------------------------------------------------------- fixtures

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               (tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str(const std::string& child = {}) const {
        return child.empty() ? path.string() : (path / child).string();
    }
};

inline lasc::Tensor random_tensor(size_t h, size_t w, size_t c, std::mt19937_64& rng,
                                  double lo = -1.0, double hi = 1.0) {
    lasc::Tensor t(h, w, c);
    std::uniform_real_distribution<double> d(lo, hi);
    for (double& v : t.data) v = d(rng);
    return t;
}

inline std::vector<double> random_vector(size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
    std::vector<double> v(n);
    std::uniform_real_distribution<double> d(lo, hi);
    for (double& x : v) x = d(rng);
    return v;
}

inline lasc::Matrix random_matrix(size_t r, size_t c, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
    lasc::Matrix m(r, c);
    std::uniform_real_distribution<double> d(lo, hi);
    for (double& x : m.v) x = d(rng);
    return m;
}

// Raw 16-bit PCM WAV bytes written by hand (independent of write_wav).
inline void write_raw_wav(const std::string& path, const std::vector<int16_t>& samples,
                          uint32_t rate, uint16_t channels = 1, uint16_t bits = 16,
                          uint16_t format_tag = 1) {
    std::ofstream f(path, std::ios::binary);
    auto u16 = [&](uint16_t v) { f.put(char(v & 0xFF)).put(char(v >> 8)); };
    auto u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) f.put(char((v >> (8 * i)) & 0xFF));
    };
    const uint32_t data_bytes = uint32_t(samples.size() * 2);
    f.write("RIFF", 4);
    u32(36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    u32(16);
    u16(format_tag);
    u16(channels);
    u32(rate);
    u32(rate * channels * bits / 8);
    u16(uint16_t(channels * bits / 8));
    u16(bits);
    f.write("data", 4);
    u32(data_bytes);
    for (int16_t s : samples) u16(uint16_t(s));
}

// --------------------------------------------------- synthetic tone corpus
// 10 classes, each the sum of two sines placed at mel filter centers so the
// classes are linearly separable in 8-band log-mel space. Clips are 18000
// samples at 44.1 kHz, which gives exactly 16 frames at window 2048/hop 1024.

struct ToneCorpus {
    static constexpr size_t kClipLen = 18000;
    static constexpr uint32_t kRate = 44100;

    static lasc::FeatureParams feature_params() {
        lasc::FeatureParams fp;
        fp.window = 2048;
        fp.hop = 1024;
        fp.n_mels = 8;
        fp.target_width = 16;
        return fp;
    }

    // Center frequency of mel band b for the 8-band layout.
    static double band_center(size_t b) {
        const double mel_max = lasc::hz_to_mel(kRate / 2.0);
        return lasc::mel_to_hz(mel_max * double(b + 1) / 9.0);
    }

    static lasc::AudioClip make_clip(int cls, uint64_t variant) {
        std::mt19937_64 rng(0x9E3779B97F4A7C15ull ^ (uint64_t(cls) << 32) ^ variant);
        std::uniform_real_distribution<double> amp(0.25, 0.35);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        const double f1 = band_center(size_t(cls % 4));
        const double f2 = band_center(4 + size_t(cls / 4));
        const double a1 = amp(rng), a2 = amp(rng), p1 = phase(rng), p2 = phase(rng);
        lasc::AudioClip clip;
        clip.sample_rate = kRate;
        clip.samples.resize(kClipLen);
        for (size_t i = 0; i < kClipLen; ++i) {
            const double t = double(i) / double(kRate);
            clip.samples[i] = a1 * std::sin(2.0 * std::numbers::pi * f1 * t + p1) +
                              a2 * std::sin(2.0 * std::numbers::pi * f2 * t + p2);
        }
        return clip;
    }

    // Writes clips_per_class clips per class plus a manifest; returns the
    // manifest path.
    static std::string write_corpus(const TempDir& dir, size_t clips_per_class,
                                    const std::string& manifest_name = "manifest.tsv") {
        lasc::CorpusManifest m;
        for (int cls = 0; cls < 10; ++cls)
            for (size_t k = 0; k < clips_per_class; ++k) {
                const std::string name = "clip_c" + std::to_string(cls) + "_" +
                                         std::to_string(k) + ".wav";
                lasc::write_wav(make_clip(cls, k), dir.str(name));
                lasc::ManifestRecord r;
                r.path = name;
                r.scene = std::string(lasc::kSceneLabels[size_t(cls)]);
                r.device = (k % 2 == 0) ? "a" : "b";
                r.city = "testville";
                m.records.push_back(r);
            }
        const std::string path = dir.str(manifest_name);
        lasc::save_manifest(m, path);
        return path;
    }

    // In-memory dataset of extracted features.
    static lasc::Dataset make_dataset(size_t clips_per_class) {
        lasc::Dataset data;
        const auto fp = feature_params();
        for (int cls = 0; cls < 10; ++cls)
            for (size_t k = 0; k < clips_per_class; ++k)
                data.push_back({lasc::extract_features(make_clip(cls, k), fp), cls});
        return data;
    }
};

}  // namespace oracles
