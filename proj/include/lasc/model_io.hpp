// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include "lasc/common.hpp"
#include "lasc/network.hpp"
#include "lasc/quantize.hpp"

namespace lasc {

// Model file, little-endian: magic "LASC", version u32=1, tensor count u32;
// per tensor: name length u16 + UTF-8 name, dtype u8 (0=f32, 1=t16), ndim
// u8, dims u32 each, then the raw payload (f32 words or truncated 16-bit
// words).

inline void save_model(const nn::ModelParams& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot create model file: " + path);
    f.write("LASC", 4);
    io::write_u32(f, 1);
    io::write_u32(f, uint32_t(model.tensors.size()));
    for (const auto& t : model.tensors) {
        if (t.name.size() > 0xFFFF) throw Error("tensor name too long: " + t.name);
        io::write_u16(f, uint16_t(t.name.size()));
        f.write(t.name.data(), std::streamsize(t.name.size()));
        f.put(char(uint8_t(t.dtype)));
        f.put(char(uint8_t(t.shape.size())));
        for (size_t d : t.shape) io::write_u32(f, uint32_t(d));
        if (t.dtype == nn::DType::kF32)
            for (double v : t.values) io::write_f32(f, float(v));
        else
            for (double v : t.values) io::write_u16(f, truncate_to_16(float(v)));
    }
    if (!f) throw Error("failed writing model file: " + path);
}

inline nn::ModelParams load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open model file: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "LASC", 4) != 0) throw Error("not a LASC model file: " + path);
    const uint32_t version = io::read_u32(f);
    if (version != 1)
        throw Error("unsupported LASC model version " + std::to_string(version) + ": " + path);

    nn::ModelParams model;
    const uint32_t count = io::read_u32(f);
    model.tensors.resize(count);
    for (auto& t : model.tensors) {
        const uint16_t name_len = io::read_u16(f);
        t.name.resize(name_len);
        f.read(t.name.data(), name_len);
        const int dtype = f.get();
        const int ndim = f.get();
        if (!f || dtype < 0 || dtype > 1 || ndim < 0)
            throw Error("corrupt tensor header in model file: " + path);
        t.dtype = nn::DType(uint8_t(dtype));
        t.shape.resize(size_t(ndim));
        for (size_t& d : t.shape) d = io::read_u32(f);
        t.values.resize(t.numel());
        if (t.dtype == nn::DType::kF32)
            for (double& v : t.values) v = double(io::read_f32(f));
        else
            for (double& v : t.values) v = double(widen_to_32(io::read_u16(f)));
        t.trainable = !nn::is_running_stat(t.name);
    }
    if (!f) throw Error("truncated model file: " + path);
    return model;
}

}  // namespace lasc
