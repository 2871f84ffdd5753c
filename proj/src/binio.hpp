#pragma once

// Little-endian primitive IO shared by the binary file formats.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "dmn/error.hpp"

namespace dmn::binio {

inline void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

inline void put_u16(std::ostream& os, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::ostream& os, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32(os, bits);
}

inline void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline std::uint8_t get_u8(std::istream& is, const std::string& what) {
    const int c = is.get();
    if (c == EOF) throw FormatError(what + " is truncated");
    return static_cast<std::uint8_t>(c);
}

inline std::uint16_t get_u16(std::istream& is, const std::string& what) {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(get_u8(is, what)) << (8 * i);
    return v;
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(get_u8(is, what)) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is, const std::string& what) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(get_u8(is, what)) << (8 * i);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

} // namespace dmn::binio
