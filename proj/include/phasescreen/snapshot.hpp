#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "phasescreen/grid.hpp"

namespace phasescreen {

/// BSPF file: "BSPF", u16 version, u32 d, u32 N_x per axis, u32 count,
/// f64 L, Z, dz, then count fields of interleaved (re, im) f64 in row-major
/// order. All values little-endian.
inline constexpr std::uint16_t snapshot_version = 1;

struct SnapshotFile {
    GridSpec grid;
    double Z = 0.0;
    double dz = 0.0;
    std::vector<ComplexField> fields;
};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    const U u = std::bit_cast<U>(v);
    for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFFU));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    if (pos + sizeof(U) > in.size()) throw NumericalError("snapshot: truncated file");
    U u = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) u |= static_cast<U>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
    pos += sizeof(U);
    return std::bit_cast<T>(u);
}

}  // namespace detail

inline std::string encode_snapshots(const SnapshotFile& s) {
    std::string out = "BSPF";
    detail::put_le<std::uint16_t>(out, snapshot_version);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.grid.dim));
    for (int a = 0; a < s.grid.dim; ++a) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.grid.points));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.fields.size()));
    detail::put_le<double>(out, s.grid.length);
    detail::put_le<double>(out, s.Z);
    detail::put_le<double>(out, s.dz);
    for (const auto& f : s.fields) {
        detail::require(f.grid == s.grid, "snapshot: field grid mismatch");
        for (const auto& v : f.values) {
            detail::put_le<double>(out, v.real());
            detail::put_le<double>(out, v.imag());
        }
    }
    return out;
}

inline SnapshotFile decode_snapshots(const std::string& in) {
    if (in.size() < 4 || in.compare(0, 4, "BSPF") != 0) throw NumericalError("snapshot: bad magic");
    std::size_t pos = 4;
    const auto version = detail::get_le<std::uint16_t>(in, pos);
    if (version != snapshot_version) throw NumericalError("snapshot: unsupported version " + std::to_string(version));
    const auto dim = detail::get_le<std::uint32_t>(in, pos);
    if (dim != 1 && dim != 2) throw NumericalError("snapshot: bad dimension");
    std::uint32_t n = 0;
    for (std::uint32_t a = 0; a < dim; ++a) {
        const auto na = detail::get_le<std::uint32_t>(in, pos);
        if (a > 0 && na != n) throw NumericalError("snapshot: unequal axis lengths are not supported");
        n = na;
    }
    const auto count = detail::get_le<std::uint32_t>(in, pos);
    SnapshotFile s;
    const double length = detail::get_le<double>(in, pos);
    s.grid = make_grid(static_cast<int>(dim), length, n);
    s.Z = detail::get_le<double>(in, pos);
    s.dz = detail::get_le<double>(in, pos);
    for (std::uint32_t k = 0; k < count; ++k) {
        ComplexField f(s.grid);
        for (auto& v : f.values) {
            const double re = detail::get_le<double>(in, pos);
            const double im = detail::get_le<double>(in, pos);
            v = {re, im};
        }
        s.fields.push_back(std::move(f));
    }
    if (pos != in.size()) throw NumericalError("snapshot: trailing bytes");
    return s;
}

inline void write_snapshots(const std::string& path, const SnapshotFile& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("snapshot: cannot open '" + path + "' for writing");
    const std::string bytes = encode_snapshots(s);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw NumericalError("snapshot: write failed for '" + path + "'");
}

inline SnapshotFile read_snapshots(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NumericalError("snapshot: cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_snapshots(bytes);
}

}  // namespace phasescreen
