#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "pfode/error.hpp"
#include "pfode/volume.hpp"

namespace pfode::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

/// Little-endian byte sink.
class ByteWriter {
public:
    template <class T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        std::array<unsigned char, sizeof(T)> raw{};
        std::memcpy(raw.data(), &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        bytes_.insert(bytes_.end(), raw.begin(), raw.end());
    }
    void put_magic(const char (&magic)[5]) { bytes_.insert(bytes_.end(), magic, magic + 4); }

    [[nodiscard]] const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }

private:
    std::vector<unsigned char> bytes_;
};

class ByteReader {
public:
    ByteReader(std::vector<unsigned char> bytes, std::string source)
        : bytes_(std::move(bytes)), source_(std::move(source)) {}

    template <class T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) throw IoError(source_ + ": truncated file");
        std::array<unsigned char, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw.data(), sizeof(T));
        return value;
    }

    void expect_magic(const char (&magic)[5]) {
        if (pos_ + 4 > bytes_.size() || std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
            throw IoError(source_ + ": bad magic, expected " + std::string(magic, 4));
        pos_ += 4;
    }

    void expect_end() const {
        if (pos_ != bytes_.size()) throw IoError(source_ + ": trailing bytes after payload");
    }

    [[nodiscard]] const std::string& source() const noexcept { return source_; }

private:
    std::vector<unsigned char> bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temp file, then renames over the target.
inline void atomic_write(const std::filesystem::path& path, const void* data, std::size_t n) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

inline void atomic_write(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    atomic_write(path, bytes.data(), bytes.size());
}

inline void atomic_write(const std::filesystem::path& path, const std::string& text) {
    atomic_write(path, text.data(), text.size());
}

inline std::string read_text(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

// TAUV: "TAUV" u32 version u32 channels u32 nx ny nz, then f32 payload, all little-endian.
inline constexpr std::uint32_t kTauvVersion = 1;

inline std::vector<unsigned char> encode_tauv(const Volume& v) {
    ByteWriter w;
    w.put_magic("TAUV");
    w.put<std::uint32_t>(kTauvVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.channels()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.dims().nx));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.dims().ny));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.dims().nz));
    for (float x : v.data()) w.put<float>(x);
    return w.bytes();
}

inline Volume decode_tauv(std::vector<unsigned char> bytes, const std::string& source = "<memory>") {
    ByteReader r(std::move(bytes), source);
    r.expect_magic("TAUV");
    const auto version = r.get<std::uint32_t>();
    if (version != kTauvVersion) throw IoError(source + ": unsupported TAUV version " + std::to_string(version));
    const auto channels = r.get<std::uint32_t>();
    Dims d;
    d.nx = r.get<std::uint32_t>();
    d.ny = r.get<std::uint32_t>();
    d.nz = r.get<std::uint32_t>();
    if (channels == 0 || d.voxels() == 0) throw IoError(source + ": empty volume header");
    std::vector<float> data(static_cast<std::size_t>(channels) * d.voxels());
    for (auto& x : data) x = r.get<float>();
    r.expect_end();
    Volume v(d, std::move(data), channels);
    if (!v.all_finite()) throw IoError(source + ": non-finite voxel values");
    return v;
}

inline void write_tauv(const std::filesystem::path& path, const Volume& v) { atomic_write(path, encode_tauv(v)); }

inline Volume read_tauv(const std::filesystem::path& path) { return decode_tauv(read_file(path), path.string()); }

inline Mask read_mask(const std::filesystem::path& path) {
    try {
        return Mask(read_tauv(path));
    } catch (const DomainError&) {
        throw IoError(path.string() + ": not a binary mask");
    }
}

/// Axial slice z as 8-bit binary PGM, min-max scaled; bounds go to `<path>.txt`.
inline void write_pgm_slice(const std::filesystem::path& path, const Volume& v, std::size_t z,
                            std::size_t channel = 0) {
    const auto& d = v.dims();
    if (z >= d.nz) throw IndexError("slice " + std::to_string(z) + " outside depth " + std::to_string(d.nz));
    float lo = v.at(0, 0, z, channel);
    float hi = lo;
    for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
            lo = std::min(lo, v.at(x, y, z, channel));
            hi = std::max(hi, v.at(x, y, z, channel));
        }
    std::string header = "P5\n" + std::to_string(d.nx) + " " + std::to_string(d.ny) + "\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    const double span = hi > lo ? static_cast<double>(hi) - lo : 1.0;
    for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
            const double s = (v.at(x, y, z, channel) - lo) / span;
            bytes.push_back(static_cast<unsigned char>(std::lround(std::clamp(s, 0.0, 1.0) * 255.0)));
        }
    atomic_write(path, bytes);
    std::ostringstream side;
    side << std::setprecision(9) << "min " << lo << "\nmax " << hi << "\n";
    auto sidecar = path;
    sidecar += ".txt";
    atomic_write(sidecar, side.str());
}

} // namespace pfode::io
