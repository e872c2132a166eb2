#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "attrsim/errors.hpp"

namespace attrsim {

// Little-endian primitives for the checkpoint and index files. Reads throw
// FormatError on truncation so callers never see silent partial state.

inline void write_u8(std::ostream& out, std::uint8_t v) {
    out.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(b, 8);
}

inline void write_i32(std::ostream& out, std::int32_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
}

inline void write_i64(std::ostream& out, std::int64_t v) {
    write_u64(out, static_cast<std::uint64_t>(v));
}

inline void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

[[noreturn]] inline void truncated(const std::string& what) {
    throw FormatError("truncated file while reading " + what);
}

inline std::uint8_t read_u8(std::istream& in, const char* what) {
    char c;
    if (!in.get(c)) {
        truncated(what);
    }
    return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
    char b[4];
    if (!in.read(b, 4)) {
        truncated(what);
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
    char b[8];
    if (!in.read(b, 8)) {
        truncated(what);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
}

inline std::int32_t read_i32(std::istream& in, const char* what) {
    return static_cast<std::int32_t>(read_u32(in, what));
}

inline std::int64_t read_i64(std::istream& in, const char* what) {
    return static_cast<std::int64_t>(read_u64(in, what));
}

inline double read_f64(std::istream& in, const char* what) {
    const std::uint64_t bits = read_u64(in, what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline std::string read_string(std::istream& in, const char* what) {
    const std::uint32_t len = read_u32(in, what);
    if (len > (1u << 20)) {
        throw FormatError(std::string("implausible string length reading ") + what);
    }
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), static_cast<std::streamsize>(len))) {
        truncated(what);
    }
    return s;
}

inline void write_f64_block(std::ostream& out, const double* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        write_f64(out, data[i]);
    }
}

inline std::vector<double> read_f64_block(std::istream& in, std::size_t count,
                                          const char* what) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        v[i] = read_f64(in, what);
    }
    return v;
}

} // namespace attrsim
