#pragma once

// =============================================================================
// Small binary/file helpers shared by the dataset, model, and CLI layers
// =============================================================================

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfgen/core.hpp"

namespace rfgen {

inline std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

inline std::uint32_t crc32_ieee(const std::string& s) {
    return crc32_ieee(reinterpret_cast<const unsigned char*>(s.data()), s.size());
}

// Little-endian packing into a byte string.
inline void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& buf, double v) {
    float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(buf, bits);
}

struct ByteReader {
    const unsigned char* p = nullptr;
    std::size_t len = 0, off = 0;

    explicit ByteReader(const std::string& s)
        : p(reinterpret_cast<const unsigned char*>(s.data())), len(s.size()) {}

    void need(std::size_t n) const {
        if (off + n > len)
            throw std::runtime_error("file truncated at byte " + std::to_string(off));
    }
    std::uint8_t u8() {
        need(1);
        return p[off++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[off] | (p[off + 1] << 8));
        off += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    double f32() {
        std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// ASCII PGM (P2) preview, top row first, values scaled to 0-255.
inline void write_pgm(const std::vector<double>& plane, int n, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "P2\n" << n << ' ' << n << "\n255\n";
    for (int iy = n - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < n; ++ix) {
            int v = static_cast<int>(std::lround(plane[static_cast<std::size_t>(iy) * n + ix] * 255.0));
            out << std::clamp(v, 0, 255) << (ix + 1 == n ? '\n' : ' ');
        }
    }
}

/// Raw board file: metal plane then via plane, f32 little-endian, row-major.
inline void write_board_f32(const BoardLayout& layout, const std::string& path) {
    std::string buf;
    buf.reserve((layout.metal.size() + layout.via.size()) * 4);
    for (double v : layout.metal) put_f32(buf, v);
    for (double v : layout.via) put_f32(buf, v);
    write_file(path, buf);
}

inline BoardLayout read_board_f32(const std::string& path, const BoardGrid& grid) {
    std::string bytes = read_file(path);
    const std::size_t plane = static_cast<std::size_t>(grid.n) * grid.n;
    if (bytes.size() != plane * 8)
        throw std::runtime_error("board file " + path + " has wrong size for a " +
                                 std::to_string(grid.n) + "-grid");
    ByteReader rd(bytes);
    BoardLayout layout(grid);
    for (auto& v : layout.metal) v = rd.f32();
    for (auto& v : layout.via) v = rd.f32();
    return layout;
}

/// 4x4 box average, exact for coverage densities (64 -> 16).
inline std::vector<double> box_downsample(const std::vector<double>& plane, int n, int factor) {
    const int m = n / factor;
    std::vector<double> out(static_cast<std::size_t>(m) * m, 0.0);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            out[static_cast<std::size_t>(iy / factor) * m + ix / factor] +=
                plane[static_cast<std::size_t>(iy) * n + ix];
    for (auto& v : out) v /= factor * factor;
    return out;
}

/// Nearest-neighbor upsample (16 -> 64).
inline std::vector<double> nearest_upsample(const std::vector<double>& plane, int m, int factor) {
    const int n = m * factor;
    std::vector<double> out(static_cast<std::size_t>(n) * n);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            out[static_cast<std::size_t>(iy) * n + ix] =
                plane[static_cast<std::size_t>(iy / factor) * m + ix / factor];
    return out;
}

}  // namespace rfgen
