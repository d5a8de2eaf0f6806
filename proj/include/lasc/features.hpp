// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "lasc/common.hpp"
#include "lasc/fft.hpp"
#include "lasc/tensor.hpp"
#include "lasc/wav.hpp"

namespace lasc {

// Power spectrogram, rows = frequency bins (fft_size/2 + 1), cols = frames.
using Spectrogram = Matrix;

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

constexpr double kLogMelFloor = 1e-10;

struct FeatureParams {
    size_t window = 2048;
    size_t hop = 1024;  // 50% overlap
    size_t n_mels = 128;
    size_t target_width = 423;
};

// Splits a clip into Hamming-windowed frames:
// w[n] = 0.54 - 0.46*cos(2*pi*n/(N-1)).
inline std::vector<std::vector<double>> frame_signal(const AudioClip& clip,
                                                     size_t window_length = 2048,
                                                     size_t hop = 1024) {
    if (hop < 1) throw Error("frame hop must be >= 1");
    if (window_length < 2) throw Error("window length must be >= 2");
    if (clip.samples.size() < window_length)
        throw Error("clip shorter than window: " + std::to_string(clip.samples.size()) + " < " +
                    std::to_string(window_length));

    std::vector<double> window(window_length);
    for (size_t n = 0; n < window_length; ++n)
        window[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(n) /
                                           double(window_length - 1));

    const size_t frame_count = (clip.samples.size() - window_length) / hop + 1;
    std::vector<std::vector<double>> frames(frame_count);
    for (size_t t = 0; t < frame_count; ++t) {
        frames[t].resize(window_length);
        const double* src = clip.samples.data() + t * hop;
        for (size_t n = 0; n < window_length; ++n) frames[t][n] = src[n] * window[n];
    }
    return frames;
}

// Linear power spectrum per frame: bin k = |DFT_k|^2, k = 0..N/2.
inline Spectrogram power_spectrum(const std::vector<std::vector<double>>& frames) {
    if (frames.empty()) throw Error("power_spectrum: no frames");
    const size_t n = frames[0].size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw Error("power_spectrum: frame length must be a power of two, got " +
                    std::to_string(n));

    const size_t bins = n / 2 + 1;
    Spectrogram spec(bins, frames.size());
    std::vector<std::complex<double>> buf(n);
    for (size_t t = 0; t < frames.size(); ++t) {
        if (frames[t].size() != n) throw Error("power_spectrum: ragged frame lengths");
        for (size_t i = 0; i < n; ++i) buf[i] = {frames[t][i], 0.0};
        fft_inplace(buf);
        for (size_t k = 0; k < bins; ++k) spec.at(k, t) = std::norm(buf[k]);
    }
    return spec;
}

// Triangular filters with centers uniformly spaced on the mel scale between
// 0 Hz and Nyquist. Weights are evaluated at the bin center frequencies, so
// peaks are <= 1 and adjacent filters partition each interval linearly.
inline Matrix mel_filterbank(size_t n_mels = 128, size_t fft_size = 2048,
                             double sample_rate = 44100.0) {
    if (n_mels < 1) throw Error("mel_filterbank: n_mels must be >= 1");
    const size_t bins = fft_size / 2 + 1;
    const double mel_max = hz_to_mel(sample_rate / 2.0);

    std::vector<double> edge_hz(n_mels + 2);
    for (size_t i = 0; i < edge_hz.size(); ++i)
        edge_hz[i] = mel_to_hz(mel_max * double(i) / double(n_mels + 1));

    Matrix fb(n_mels, bins);
    for (size_t m = 0; m < n_mels; ++m) {
        const double lo = edge_hz[m], mid = edge_hz[m + 1], hi = edge_hz[m + 2];
        bool any = false;
        for (size_t k = 0; k < bins; ++k) {
            const double f = double(k) * sample_rate / double(fft_size);
            double w = 0.0;
            if (f > lo && f < hi)
                w = (f <= mid) ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            fb.at(m, k) = w;
            any = any || w > 0.0;
        }
        if (!any)
            throw Error("mel_filterbank: filter " + std::to_string(m) +
                        " covers no spectral bin; n_mels too large for fft_size " +
                        std::to_string(fft_size) + " at " + std::to_string(sample_rate) + " Hz");
    }
    return fb;
}

// L = ln(fb * spec + eps). The floor keeps every downstream value finite.
inline Matrix log_mel(const Spectrogram& spec, const Matrix& fb) {
    if (fb.cols != spec.rows)
        throw Error("log_mel: filter bank has " + std::to_string(fb.cols) +
                    " bins but spectrogram has " + std::to_string(spec.rows));
    Matrix out(fb.rows, spec.cols);
    for (size_t m = 0; m < fb.rows; ++m) {
        for (size_t t = 0; t < spec.cols; ++t) {
            double acc = 0.0;
            for (size_t k = 0; k < fb.cols; ++k) acc += fb.at(m, k) * spec.at(k, t);
            out.at(m, t) = std::log(acc + kLogMelFloor);
        }
    }
    return out;
}

// Regression deltas with half-window 2 and replicate padding:
// d_t = (1*(c_{t+1}-c_{t-1}) + 2*(c_{t+2}-c_{t-2})) / 10.
// delta-delta is the same operator applied to delta.
inline Matrix delta_matrix(const Matrix& m) {
    const long T = long(m.cols);
    auto clampi = [T](long t) { return size_t(t < 0 ? 0 : (t >= T ? T - 1 : t)); };
    Matrix d(m.rows, m.cols);
    for (size_t b = 0; b < m.rows; ++b)
        for (long t = 0; t < T; ++t) {
            double num = 0.0;
            for (long n = 1; n <= 2; ++n)
                num += double(n) * (m.at(b, clampi(t + n)) - m.at(b, clampi(t - n)));
            d.at(b, size_t(t)) = num / 10.0;  // 2 * (1^2 + 2^2)
        }
    return d;
}

inline std::pair<Matrix, Matrix> deltas(const Matrix& lms) {
    if (lms.cols < 5)
        throw Error("deltas: too few frames (" + std::to_string(lms.cols) + " < 5)");
    Matrix d = delta_matrix(lms);
    Matrix dd = delta_matrix(d);
    return {std::move(d), std::move(dd)};
}

// Stacks LMS / delta / delta-delta into (band, frame, channel) and fixes the
// frame axis to target_width: wider inputs are center-cropped (dropping
// floor((W-T)/2) leading frames), narrower ones replicate the last frame.
inline Tensor assemble_feature(const Matrix& lms, const Matrix& delta, const Matrix& delta_delta,
                               size_t target_width = 423) {
    if (lms.rows != delta.rows || lms.rows != delta_delta.rows || lms.cols != delta.cols ||
        lms.cols != delta_delta.cols)
        throw Error("assemble_feature: channel matrices have mismatched shapes");

    const size_t W = lms.cols;
    const size_t offset = W > target_width ? (W - target_width) / 2 : 0;
    const Matrix* chans[3] = {&lms, &delta, &delta_delta};

    Tensor out(lms.rows, target_width, 3);
    for (size_t b = 0; b < lms.rows; ++b)
        for (size_t t = 0; t < target_width; ++t) {
            const size_t src = std::min(offset + t, W - 1);
            for (size_t ch = 0; ch < 3; ++ch) out.at(b, t, ch) = chans[ch]->at(b, src);
        }
    return out;
}

// Full pipeline: frames -> power spectrum -> mel -> log -> deltas -> stack.
inline Tensor extract_features(const AudioClip& clip, const FeatureParams& p = {}) {
    auto frames = frame_signal(clip, p.window, p.hop);
    auto spec = power_spectrum(frames);
    auto fb = mel_filterbank(p.n_mels, p.window, double(clip.sample_rate));
    auto lms = log_mel(spec, fb);
    auto [d, dd] = deltas(lms);
    return assemble_feature(lms, d, dd, p.target_width);
}

// FEAT file: magic "FEAT", version u32=1, dims u32 x3, f32 payload in
// (band, frame, channel) row-major order, little-endian throughout.
inline void write_feature(const Tensor& feat, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot create feature file: " + path);
    f.write("FEAT", 4);
    io::write_u32(f, 1);
    io::write_u32(f, uint32_t(feat.h));
    io::write_u32(f, uint32_t(feat.w));
    io::write_u32(f, uint32_t(feat.c));
    for (double v : feat.data) io::write_f32(f, float(v));
    if (!f) throw Error("failed writing feature file: " + path);
}

inline Tensor read_feature(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open feature file: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "FEAT", 4) != 0)
        throw Error("not a FEAT file: " + path);
    const uint32_t version = io::read_u32(f);
    if (version != 1) throw Error("unsupported FEAT version " + std::to_string(version));
    const uint32_t h = io::read_u32(f), w = io::read_u32(f), c = io::read_u32(f);
    Tensor feat(h, w, c);
    for (double& v : feat.data) v = double(io::read_f32(f));
    if (!f) throw Error("truncated feature file: " + path);
    return feat;
}

}  // namespace lasc
