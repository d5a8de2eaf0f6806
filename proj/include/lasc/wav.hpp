// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "lasc/common.hpp"

namespace lasc {

// A decoded mono clip. Samples are 16-bit PCM values divided by 32768, so
// the representable range is [-1, 1) and decode/encode round-trips are exact.
struct AudioClip {
    std::vector<double> samples;
    uint32_t sample_rate = 0;

    double duration_seconds() const {
        return sample_rate ? double(samples.size()) / sample_rate : 0.0;
    }
};

// Reads a canonical RIFF/WAVE file. Only PCM, 16-bit, mono is accepted;
// anything else is rejected with a distinct error rather than transcoded.
inline AudioClip read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open wav file: " + path);

    char tag[4];
    auto read_tag = [&](const char* what) {
        f.read(tag, 4);
        if (!f) throw Error(std::string("truncated wav file (") + what + "): " + path);
    };

    read_tag("RIFF id");
    if (std::memcmp(tag, "RIFF", 4) != 0) throw Error("not a RIFF file: " + path);
    io::read_u32(f);  // riff payload size, unused
    read_tag("WAVE id");
    if (std::memcmp(tag, "WAVE", 4) != 0) throw Error("not a WAVE file: " + path);

    bool have_fmt = false;
    uint16_t format_tag = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;

    // Chunk walk: fmt must precede data; unknown chunks are skipped.
    while (f.peek() != EOF) {
        read_tag("chunk id");
        uint32_t size = io::read_u32(f);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (size < 16) throw Error("malformed fmt chunk: " + path);
            format_tag = io::read_u16(f);
            channels = io::read_u16(f);
            sample_rate = io::read_u32(f);
            io::read_u32(f);  // byte rate
            io::read_u16(f);  // block align
            bits = io::read_u16(f);
            f.seekg(size - 16 + (size & 1), std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw Error("wav data chunk before fmt chunk: " + path);
            if (format_tag != 1)
                throw Error("unsupported wav encoding (fmt tag " + std::to_string(format_tag) +
                            "), only PCM is supported: " + path);
            if (channels != 1)
                throw Error("unsupported channel count " + std::to_string(channels) +
                            ", only mono is supported: " + path);
            if (bits != 16)
                throw Error("unsupported bit depth " + std::to_string(bits) +
                            ", only 16-bit is supported: " + path);

            AudioClip clip;
            clip.sample_rate = sample_rate;
            const size_t n = size / 2;
            clip.samples.resize(n);
            std::vector<unsigned char> raw(size);
            f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(size));
            if (!f) throw Error("truncated wav data chunk: " + path);
            for (size_t i = 0; i < n; ++i) {
                const int16_t s = int16_t(raw[2 * i] | (uint16_t(raw[2 * i + 1]) << 8));
                clip.samples[i] = double(s) / 32768.0;
            }
            return clip;
        } else {
            f.seekg(size + (size & 1), std::ios::cur);
            if (!f) throw Error("truncated wav chunk: " + path);
        }
    }
    throw Error(have_fmt ? "wav file has no data chunk: " + path
                         : "wav file has no fmt chunk: " + path);
}

// Writes a canonical 44-byte-header PCM WAV. Values decoded by read_wav
// re-encode to the identical 16-bit words.
inline void write_wav(const AudioClip& clip, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot create wav file: " + path);

    const uint32_t data_bytes = uint32_t(clip.samples.size() * 2);
    f.write("RIFF", 4);
    io::write_u32(f, 36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    io::write_u32(f, 16);
    io::write_u16(f, 1);  // PCM
    io::write_u16(f, 1);  // mono
    io::write_u32(f, clip.sample_rate);
    io::write_u32(f, clip.sample_rate * 2);
    io::write_u16(f, 2);
    io::write_u16(f, 16);
    f.write("data", 4);
    io::write_u32(f, data_bytes);
    for (double s : clip.samples) {
        double q = std::nearbyint(s * 32768.0);
        q = std::clamp(q, -32768.0, 32767.0);
        io::write_u16(f, uint16_t(int16_t(q)));
    }
    if (!f) throw Error("failed writing wav file: " + path);
}

}  // namespace lasc
