#pragma once

#include <algorithm>
#include <cmath>

#include "pfode/error.hpp"
#include "pfode/volume.hpp"

namespace pfode {

/// Fixed analytic latent codec: k^3 average pooling down, trilinear up.
struct LatentCodecSpec {
    std::size_t k = 4;
};

inline Dims latent_dims(const Dims& image, const LatentCodecSpec& spec) {
    if (spec.k == 0) throw ConfigError("codec: downsample factor must be positive");
    if (image.nx % spec.k || image.ny % spec.k || image.nz % spec.k)
        throw ConfigError("codec: image dims " + to_string(image) + " not divisible by k=" + std::to_string(spec.k));
    return {image.nx / spec.k, image.ny / spec.k, image.nz / spec.k};
}

inline Volume encode(const Volume& image, const LatentCodecSpec& spec) {
    const Dims ld = latent_dims(image.dims(), spec);
    const std::size_t k = spec.k;
    const double inv = 1.0 / static_cast<double>(k * k * k);
    Volume out(ld, image.channels());
    for (std::size_t c = 0; c < image.channels(); ++c)
        for (std::size_t z = 0; z < ld.nz; ++z)
            for (std::size_t y = 0; y < ld.ny; ++y)
                for (std::size_t x = 0; x < ld.nx; ++x) {
                    double acc = 0.0;
                    for (std::size_t dz = 0; dz < k; ++dz)
                        for (std::size_t dy = 0; dy < k; ++dy)
                            for (std::size_t dx = 0; dx < k; ++dx)
                                acc += image.at(x * k + dx, y * k + dy, z * k + dz, c);
                    out.at(x, y, z, c) = static_cast<float>(acc * inv);
                }
    return out;
}

namespace detail {

/// Linear interpolation taps along one axis: latent centres sit at image coordinate (i + 0.5) k - 0.5.
struct Taps {
    std::size_t lo = 0, hi = 0;
    double w_hi = 0.0;
};

inline std::vector<Taps> upsample_taps(std::size_t n_latent, std::size_t k) {
    std::vector<Taps> taps(n_latent * k);
    for (std::size_t p = 0; p < taps.size(); ++p) {
        double u = (static_cast<double>(p) + 0.5) / static_cast<double>(k) - 0.5;
        u = std::clamp(u, 0.0, static_cast<double>(n_latent - 1));
        const auto lo = static_cast<std::size_t>(std::floor(u));
        taps[p] = {lo, std::min(lo + 1, n_latent - 1), u - static_cast<double>(lo)};
    }
    return taps;
}

} // namespace detail

inline Volume decode(const Volume& latent, const LatentCodecSpec& spec) {
    if (spec.k == 0) throw ConfigError("codec: downsample factor must be positive");
    const Dims ld = latent.dims();
    const std::size_t k = spec.k;
    const Dims id{ld.nx * k, ld.ny * k, ld.nz * k};
    const auto tx = detail::upsample_taps(ld.nx, k);
    const auto ty = detail::upsample_taps(ld.ny, k);
    const auto tz = detail::upsample_taps(ld.nz, k);
    Volume out(id, latent.channels());
    for (std::size_t c = 0; c < latent.channels(); ++c)
        for (std::size_t z = 0; z < id.nz; ++z)
            for (std::size_t y = 0; y < id.ny; ++y)
                for (std::size_t x = 0; x < id.nx; ++x) {
                    const auto& a = tx[x];
                    const auto& b = ty[y];
                    const auto& g = tz[z];
                    auto L = [&](std::size_t i, std::size_t j, std::size_t l) {
                        return static_cast<double>(latent.at(i, j, l, c));
                    };
                    const double c00 = L(a.lo, b.lo, g.lo) * (1 - a.w_hi) + L(a.hi, b.lo, g.lo) * a.w_hi;
                    const double c10 = L(a.lo, b.hi, g.lo) * (1 - a.w_hi) + L(a.hi, b.hi, g.lo) * a.w_hi;
                    const double c01 = L(a.lo, b.lo, g.hi) * (1 - a.w_hi) + L(a.hi, b.lo, g.hi) * a.w_hi;
                    const double c11 = L(a.lo, b.hi, g.hi) * (1 - a.w_hi) + L(a.hi, b.hi, g.hi) * a.w_hi;
                    const double c0 = c00 * (1 - b.w_hi) + c10 * b.w_hi;
                    const double c1 = c01 * (1 - b.w_hi) + c11 * b.w_hi;
                    out.at(x, y, z, c) = static_cast<float>(c0 * (1 - g.w_hi) + c1 * g.w_hi);
                }
    return out;
}

/// Central-difference gradient magnitude with replicate padding, normalised by its maximum.
inline Volume edge_map(const Volume& latent) {
    const Dims d = latent.dims();
    if (d.nx < 3 || d.ny < 3 || d.nz < 3) throw DimensionError("edge_map: need at least 3 voxels per axis");
    auto at = [&](std::ptrdiff_t x, std::ptrdiff_t y, std::ptrdiff_t z) {
        auto cl = [](std::ptrdiff_t i, std::size_t n) {
            return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
        };
        return static_cast<double>(latent.at(cl(x, d.nx), cl(y, d.ny), cl(z, d.nz)));
    };
    std::vector<double> mag(d.voxels());
    double peak = 0.0;
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
                const auto X = static_cast<std::ptrdiff_t>(x);
                const auto Y = static_cast<std::ptrdiff_t>(y);
                const auto Z = static_cast<std::ptrdiff_t>(z);
                const double gx = 0.5 * (at(X + 1, Y, Z) - at(X - 1, Y, Z));
                const double gy = 0.5 * (at(X, Y + 1, Z) - at(X, Y - 1, Z));
                const double gz = 0.5 * (at(X, Y, Z + 1) - at(X, Y, Z - 1));
                const double m = std::sqrt(gx * gx + gy * gy + gz * gz);
                mag[d.index(x, y, z)] = m;
                peak = std::max(peak, m);
            }
    Volume out(d);
    if (peak > 0.0)
        for (std::size_t i = 0; i < mag.size(); ++i) out[i] = static_cast<float>(mag[i] / peak);
    return out;
}

/// Image-space mask to latent space: pooled occupancy thresholded at 0.5.
inline Mask encode_mask(const Mask& image_mask, const LatentCodecSpec& spec) {
    return threshold(encode(image_mask.volume(), spec), 0.5f);
}

} // namespace pfode
