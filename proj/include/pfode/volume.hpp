#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pfode/error.hpp"

namespace pfode {

struct Dims {
    std::size_t nx = 0, ny = 0, nz = 0;

    [[nodiscard]] constexpr std::size_t voxels() const noexcept { return nx * ny * nz; }
    [[nodiscard]] constexpr std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
        return x + nx * (y + ny * z);
    }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
    return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

/// Dense 3D scalar field, x-fastest, channel-major blocks.
class Volume {
public:
    Volume() = default;

    explicit Volume(Dims dims, std::size_t channels = 1, float fill = 0.0f)
        : dims_(dims), channels_(channels) {
        validate_shape();
        data_.assign(channels_ * dims_.voxels(), fill);
    }

    Volume(Dims dims, std::vector<float> data, std::size_t channels = 1)
        : dims_(dims), channels_(channels), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != channels_ * dims_.voxels())
            throw DimensionError("data length " + std::to_string(data_.size()) + " != channels*voxels for " +
                                 to_string(dims_));
    }

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t channels() const noexcept { return channels_; }
    [[nodiscard]] std::size_t voxels() const noexcept { return dims_.voxels(); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<float> data() noexcept { return data_; }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }

    [[nodiscard]] std::span<float> channel(std::size_t c) {
        return std::span<float>(data_).subspan(c * voxels(), voxels());
    }
    [[nodiscard]] std::span<const float> channel(std::size_t c) const {
        return std::span<const float>(data_).subspan(c * voxels(), voxels());
    }

    float& operator[](std::size_t i) noexcept { return data_[i]; }
    const float& operator[](std::size_t i) const noexcept { return data_[i]; }

    float& at(std::size_t x, std::size_t y, std::size_t z, std::size_t c = 0) noexcept {
        return data_[c * voxels() + dims_.index(x, y, z)];
    }
    [[nodiscard]] float at(std::size_t x, std::size_t y, std::size_t z, std::size_t c = 0) const noexcept {
        return data_[c * voxels() + dims_.index(x, y, z)];
    }

    [[nodiscard]] bool same_shape(const Volume& o) const noexcept {
        return dims_ == o.dims_ && channels_ == o.channels_;
    }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    void validate_shape() const {
        if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
            throw DimensionError("volume dims must be positive, got " + to_string(dims_));
        if (channels_ == 0) throw DimensionError("volume must have at least one channel");
    }

    Dims dims_{};
    std::size_t channels_ = 1;
    std::vector<float> data_;
};

/// Strictly binary single-channel volume.
class Mask {
public:
    Mask() = default;

    explicit Mask(Volume v) : v_(std::move(v)) {
        if (v_.channels() != 1) throw DimensionError("mask must be single-channel");
        for (float x : v_.data())
            if (x != 0.0f && x != 1.0f) throw DomainError("mask values must be 0 or 1");
    }

    static Mask full(Dims d) { return Mask(Volume(d, 1, 1.0f)); }

    [[nodiscard]] const Volume& volume() const noexcept { return v_; }
    [[nodiscard]] const Dims& dims() const noexcept { return v_.dims(); }
    [[nodiscard]] bool operator[](std::size_t i) const noexcept { return v_[i] != 0.0f; }

    [[nodiscard]] std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count(v_.data().begin(), v_.data().end(), 1.0f));
    }

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    Volume v_;
};

namespace detail {

inline void require_same_shape(const Volume& a, const Volume& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.dims()) + "x" +
                             std::to_string(a.channels()) + " vs " + to_string(b.dims()) + "x" +
                             std::to_string(b.channels()));
}

inline void require_finite(const Volume& v, const char* op) {
    if (!v.all_finite()) throw DomainError(std::string(op) + ": non-finite result");
}

inline void require_mask_for(const Volume& v, const Mask& m, const char* op) {
    if (v.dims() != m.dims()) throw DimensionError(std::string(op) + ": mask dims differ from volume");
    if (m.count() == 0) throw DomainError(std::string(op) + ": empty mask");
}

template <class F>
Volume zip(const Volume& a, const Volume& b, const char* op, F f) {
    require_same_shape(a, b, op);
    Volume out(a.dims(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    require_finite(out, op);
    return out;
}

template <class F>
Volume map(const Volume& a, const char* op, F f) {
    Volume out(a.dims(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    require_finite(out, op);
    return out;
}

} // namespace detail

inline Volume add(const Volume& a, const Volume& b) {
    return detail::zip(a, b, "add", [](float x, float y) { return x + y; });
}
inline Volume sub(const Volume& a, const Volume& b) {
    return detail::zip(a, b, "sub", [](float x, float y) { return x - y; });
}
inline Volume mul(const Volume& a, const Volume& b) {
    return detail::zip(a, b, "mul", [](float x, float y) { return x * y; });
}
inline Volume add(const Volume& a, float s) {
    return detail::map(a, "add", [s](float x) { return x + s; });
}
inline Volume sub(const Volume& a, float s) {
    return detail::map(a, "sub", [s](float x) { return x - s; });
}
inline Volume scale(const Volume& a, float s) {
    return detail::map(a, "scale", [s](float x) { return x * s; });
}

/// Σ(v·m)/Σm over channel 0, serial double-precision accumulation.
inline double masked_mean(const Volume& v, const Mask& m, std::size_t channel = 0) {
    detail::require_mask_for(v, m, "masked_mean");
    auto data = v.channel(channel);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (m[i]) {
            num += data[i];
            den += 1.0;
        }
    }
    return num / den;
}

inline std::vector<double> masked_values(const Volume& v, const Mask& m) {
    detail::require_mask_for(v, m, "masked_values");
    std::vector<double> out;
    out.reserve(m.count());
    auto data = v.channel(0);
    for (std::size_t i = 0; i < data.size(); ++i)
        if (m[i]) out.push_back(data[i]);
    return out;
}

/// Percentile of already-sorted values with linear interpolation between order statistics.
inline double sorted_percentile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DomainError("percentile of empty set");
    if (!(q >= 0.0 && q <= 100.0)) throw DomainError("percentile q outside [0, 100]");
    const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double percentile(const Volume& v, const Mask& m, double q) {
    auto values = masked_values(v, m);
    std::sort(values.begin(), values.end());
    return sorted_percentile(values, q);
}

inline Mask threshold(const Volume& v, float level) {
    Volume out(v.dims());
    auto src = v.channel(0);
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] >= level ? 1.0f : 0.0f;
    return Mask(std::move(out));
}

} // namespace pfode
