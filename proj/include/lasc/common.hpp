// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lasc {

// Library-wide exception. Messages are meant to be specific enough that a
// caller can tell apart the distinct failure modes of one operation.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace io {

// Little-endian primitives for the binary file formats (WAV, FEAT, LASC).

inline void write_u16(std::ostream& os, uint16_t v) {
    const char b[2] = {char(v & 0xFF), char(v >> 8)};
    os.write(b, 2);
}

inline void write_u32(std::ostream& os, uint32_t v) {
    const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
                       char(v >> 24)};
    os.write(b, 4);
}

inline void write_f32(std::ostream& os, float f) {
    write_u32(os, std::bit_cast<uint32_t>(f));
}

inline uint16_t read_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    if (!is) throw Error("unexpected end of stream while reading u16");
    return uint16_t(b[0] | (uint16_t(b[1]) << 8));
}

inline uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw Error("unexpected end of stream while reading u32");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
           (uint32_t(b[3]) << 24);
}

inline float read_f32(std::istream& is) {
    return std::bit_cast<float>(read_u32(is));
}

}  // namespace io
}  // namespace lasc
