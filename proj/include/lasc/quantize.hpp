// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <sstream>
#include <string>

#include "lasc/common.hpp"
#include "lasc/network.hpp"

namespace lasc {

// 32->16-bit float truncation: the sign bit and the 8 exponent bits are kept
// unchanged, and the upper 7 mantissa bits become the 16-bit word's mantissa.
// Pure truncation, no rounding.
inline uint16_t truncate_to_16(uint32_t word32) { return uint16_t(word32 >> 16); }

inline uint16_t truncate_to_16(float x) { return truncate_to_16(std::bit_cast<uint32_t>(x)); }

// Inverse mapping for inference on compressed models: the low 16 mantissa
// bits come back as zeros.
inline float widen_to_32(uint16_t word16) {
    return std::bit_cast<float>(uint32_t(word16) << 16);
}

// Truncates every tensor element-wise and tags the payloads t16. Values are
// kept as the widened doubles, so stored and computed values agree exactly.
inline nn::ModelParams quantize_model(const nn::ModelParams& model) {
    for (const auto& t : model.tensors)
        if (t.dtype != nn::DType::kF32)
            throw Error("quantize_model: tensor '" + t.name + "' is already 16-bit");
    nn::ModelParams out = model;
    for (auto& t : out.tensors) {
        for (double& v : t.values) v = double(widen_to_32(truncate_to_16(float(v))));
        t.dtype = nn::DType::kT16;
    }
    return out;
}

struct BudgetReport {
    size_t nonzero_count = 0;
    int bits_per_param = 32;
    double size_kb = 0.0;
    double limit_kb = 128.0;
    bool pass = false;
};

// Counts exact non-zeros, reads the bit width off the dtype tags, and checks
// nonzero * bits / 8 / 1024 against the limit. The size is a dyadic rational
// and therefore exact in double before any display rounding.
inline BudgetReport audit_budget(const nn::ModelParams& model, double limit_kb = 128.0) {
    BudgetReport r;
    r.limit_kb = limit_kb;
    if (!model.tensors.empty()) {
        const nn::DType dtype = model.tensors.front().dtype;
        for (const auto& t : model.tensors)
            if (t.dtype != dtype)
                throw Error("audit_budget: mixed dtypes in one model ('" +
                            model.tensors.front().name + "' is " +
                            (dtype == nn::DType::kF32 ? "f32" : "t16") + ", '" + t.name +
                            "' is not)");
        r.bits_per_param = dtype == nn::DType::kF32 ? 32 : 16;
    }
    r.nonzero_count = nn::count_parameters(model, false);
    r.size_kb = double(r.nonzero_count) * double(r.bits_per_param) / 8.0 / 1024.0;
    r.pass = r.size_kb <= r.limit_kb;
    return r;
}

// One-line machine-readable summary, size printed at 0.1 KB resolution.
inline std::string budget_summary_line(const BudgetReport& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << "nonzero=" << r.nonzero_count << " bits=" << r.bits_per_param << " size_kb=" << r.size_kb
       << " limit_kb=" << r.limit_kb << " pass=" << (r.pass ? 1 : 0);
    return os.str();
}

}  // namespace lasc
