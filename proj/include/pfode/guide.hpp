#pragma once

#include <climits>
#include <cmath>
#include <vector>

#include "pfode/denoise.hpp"
#include "pfode/error.hpp"
#include "pfode/volume.hpp"

namespace pfode {

/// Intensity guidance toward a healthy template inside a shape mask.
struct GuidanceSpec {
    Volume template_volume;
    Mask shape;
    double nu = 1.0;
    JacobianMode grad_mode = JacobianMode::full;
    /// Classifier-free scale; only 0 is supported.
    double cfg_scale = 0.0;
    /// Guidance is applied for t in [t_min, t_max].
    int t_min = 1;
    int t_max = INT_MAX;

    void validate(const Dims& latent) const {
        if (template_volume.dims() != latent || shape.dims() != latent)
            throw DimensionError("guidance: template/shape dims must equal latent dims " + to_string(latent));
        if (shape.count() == 0) throw DomainError("guidance: shape mask is empty");
        if (!(nu >= 0.0)) throw ConfigError("guidance: nu must be >= 0");
        if (cfg_scale != 0.0) throw ConfigError("guidance: only cfg_scale = 0 is supported");
    }

    [[nodiscard]] bool active_at(int t) const noexcept { return nu > 0.0 && t >= t_min && t <= t_max; }
};

/// Voxelwise arithmetic mean of equally shaped volumes.
inline Volume build_template(const std::vector<Volume>& volumes) {
    if (volumes.empty()) throw DomainError("build_template: no volumes");
    const Volume& first = volumes.front();
    std::vector<double> acc(first.size(), 0.0);
    for (const auto& v : volumes) {
        detail::require_same_shape(first, v, "build_template");
        for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
    }
    Volume out(first.dims(), first.channels());
    const double n = static_cast<double>(volumes.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
    return out;
}

/// Shape-masked mean per channel.
inline std::vector<double> appearance(const Volume& psi, const Mask& shape) {
    std::vector<double> out(psi.channels());
    for (std::size_t c = 0; c < psi.channels(); ++c) out[c] = masked_mean(psi, shape, c);
    return out;
}

namespace detail {

inline double masked_mean_exact(std::span<const double> v, const Mask& m) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (m[i]) {
            num += v[i];
            den += 1.0;
        }
    return num / den;
}

} // namespace detail

/// Signed appearance gap between the denoised estimate and the template.
inline double appearance_gap(const Volume& x_t, int t, const GuidanceSpec& spec, const Denoiser& den,
                             const Condition& cond) {
    spec.validate(x_t.dims());
    const Field x0 = den.predict_x0_exact(x_t, t, cond);
    return detail::masked_mean_exact(x0, spec.shape) - masked_mean(spec.template_volume, spec.shape);
}

/// g = |appearance(x0_hat(x_t)) - appearance(template)|_1
inline double energy_g(const Volume& x_t, int t, const GuidanceSpec& spec, const Denoiser& den,
                       const Condition& cond) {
    return std::abs(appearance_gap(x_t, t, spec, den, cond));
}

struct GuidanceGradient {
    Field grad;
    /// The appearance gap was exactly zero; the subgradient 0 was returned.
    bool at_kink = false;
};

inline GuidanceGradient grad_g_exact(const Volume& x_t, int t, const GuidanceSpec& spec, const Denoiser& den,
                                     const Condition& cond) {
    const double gap = appearance_gap(x_t, t, spec, den, cond);
    GuidanceGradient out;
    if (gap == 0.0) {
        out.grad.assign(x_t.size(), 0.0);
        out.at_kink = true;
        return out;
    }
    const double w = (gap > 0.0 ? 1.0 : -1.0) / static_cast<double>(spec.shape.count());
    Field cot(x_t.size());
    for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = spec.shape[i] ? w : 0.0;
    if (spec.grad_mode == JacobianMode::stop_gradient || den.x0_jacobian_mode() == JacobianMode::stop_gradient) {
        const double sab = std::sqrt(den.schedule().alpha_bar(t));
        for (auto& c : cot) c *= sab;
        out.grad = std::move(cot);
    } else {
        out.grad = den.x0_vjp(x_t, t, cond, cot);
    }
    return out;
}

inline Volume grad_g(const Volume& x_t, int t, const GuidanceSpec& spec, const Denoiser& den, const Condition& cond,
                     bool* at_kink = nullptr) {
    const auto g = grad_g_exact(x_t, t, spec, den, cond);
    if (at_kink) *at_kink = g.at_kink;
    Volume out(x_t.dims());
    for (std::size_t i = 0; i < g.grad.size(); ++i) out[i] = static_cast<float>(g.grad[i]);
    return out;
}

} // namespace pfode
