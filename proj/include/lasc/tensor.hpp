// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lasc/common.hpp"

namespace lasc {

// Rank-3 array in (height, width, channel) row-major order. Feature maps use
// it as (mel band, frame, channel); network layers as (H, W, C).
struct Tensor {
    size_t h = 0, w = 0, c = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(size_t h_, size_t w_, size_t c_) : h(h_), w(w_), c(c_), data(h_ * w_ * c_, 0.0) {}

    size_t size() const { return h * w * c; }

    double& at(size_t y, size_t x, size_t ch) { return data[(y * w + x) * c + ch]; }
    double at(size_t y, size_t x, size_t ch) const { return data[(y * w + x) * c + ch]; }

    bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }

    std::string shape_str() const {
        return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
    }
};

// Dense row-major matrix: spectrograms (bin x frame), mel filter banks
// (band x bin), log-mel features (band x frame), dense-layer weights.
struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double& at(size_t r, size_t c) { return v[r * cols + c]; }
    double at(size_t r, size_t c) const { return v[r * cols + c]; }
};

}  // namespace lasc
