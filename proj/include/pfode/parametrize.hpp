#pragma once

#include <cmath>

#include "pfode/schedule.hpp"
#include "pfode/volume.hpp"

namespace pfode {

namespace detail {

/// out[i] = a * x[i] + b * y[i], evaluated in double.
inline Volume affine2(double a, const Volume& x, double b, const Volume& y, const char* op) {
    require_same_shape(x, y, op);
    Volume out(x.dims(), x.channels());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(a * x[i] + b * y[i]);
    require_finite(out, op);
    return out;
}

} // namespace detail

/// x0_hat = sqrt(ab) x_t - sqrt(1 - ab) v
inline Volume v_to_x0(const Volume& x_t, const Volume& v, const NoiseSchedule& s, int t) {
    const double ab = s.alpha_bar(t);
    return detail::affine2(std::sqrt(ab), x_t, -std::sqrt(1.0 - ab), v, "v_to_x0");
}

/// Unguided epsilon estimate from a v-prediction, in the expanded form
/// (1/sqrt(ab)) v + sqrt(1/ab - 1) (sqrt(ab) x_t - sqrt(1 - ab) v).
inline Volume v_to_epsilon(const Volume& x_t, const Volume& v, const NoiseSchedule& s, int t) {
    detail::require_same_shape(x_t, v, "v_to_epsilon");
    const double ab = s.alpha_bar(t);
    if (!(ab > 0.0)) throw DomainError("v_to_epsilon: alpha_bar is zero");
    const double sab = std::sqrt(ab);
    const double s1ab = std::sqrt(1.0 - ab);
    const double k = std::sqrt(1.0 / ab - 1.0);
    Volume out(x_t.dims(), x_t.channels());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        const double vi = v[i];
        out[i] = static_cast<float>(vi / sab + k * (sab * x_t[i] - s1ab * vi));
    }
    detail::require_finite(out, "v_to_epsilon");
    return out;
}

/// Inverse of v_to_epsilon at fixed x_t: v = (eps - sqrt(1 - ab) x_t) / sqrt(ab).
inline Volume epsilon_to_v(const Volume& x_t, const Volume& eps, const NoiseSchedule& s, int t) {
    const double ab = s.alpha_bar(t);
    if (!(ab > 0.0)) throw DomainError("epsilon_to_v: alpha_bar is zero");
    const double sab = std::sqrt(ab);
    return detail::affine2(1.0 / sab, eps, -std::sqrt(1.0 - ab) / sab, x_t, "epsilon_to_v");
}

/// S = -eps / sigma_t
inline Volume epsilon_to_score(const Volume& eps, const NoiseSchedule& s, int t) {
    const double sigma = s.sigma(t);
    if (!(sigma > 0.0)) throw DomainError("epsilon_to_score: sigma_t is zero at t=" + std::to_string(t));
    return detail::map(eps, "epsilon_to_score", [k = -1.0 / sigma](float e) { return static_cast<float>(k * e); });
}

inline Volume score_to_epsilon(const Volume& score, const NoiseSchedule& s, int t) {
    const double sigma = s.sigma(t);
    return detail::map(score, "score_to_epsilon", [k = -sigma](float e) { return static_cast<float>(k * e); });
}

/// eps_hat = base + nu * sigma_t * grad_g
inline Volume assemble_guided_epsilon(const Volume& base_eps, const Volume& grad_g, double nu,
                                      const NoiseSchedule& s, int t) {
    return detail::affine2(1.0, base_eps, nu * s.sigma(t), grad_g, "assemble_guided_epsilon");
}

/// Training target v = sqrt(ab) eps - sqrt(1 - ab) x0.
inline Volume true_v(const Volume& x0, const Volume& eps, const NoiseSchedule& s, int t) {
    const double ab = s.alpha_bar(t);
    return detail::affine2(std::sqrt(ab), eps, -std::sqrt(1.0 - ab), x0, "true_v");
}

/// x_t = sqrt(ab) x0 + sqrt(1 - ab) eps for a given noise draw.
inline Volume noise_with(const Volume& x0, const Volume& eps, const NoiseSchedule& s, int t) {
    const double ab = s.alpha_bar(t);
    return detail::affine2(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps, "noise_with");
}

enum class PredictionKind { v, epsilon, x0, score };

/// A denoiser output tagged with its parametrization and timestep.
struct Prediction {
    PredictionKind kind = PredictionKind::v;
    Volume value;
    int t = 1;
};

namespace detail {

inline Volume prediction_to_epsilon(const Prediction& p, const Volume& x_t, const NoiseSchedule& s) {
    switch (p.kind) {
    case PredictionKind::epsilon: return p.value;
    case PredictionKind::v: return v_to_epsilon(x_t, p.value, s, p.t);
    case PredictionKind::score: return score_to_epsilon(p.value, s, p.t);
    case PredictionKind::x0: {
        // eps = (x_t - sqrt(ab) x0) / sqrt(1 - ab)
        const double ab = s.alpha_bar(p.t);
        const double sig = std::sqrt(1.0 - ab);
        if (!(sig > 0.0)) throw DomainError("x0 -> epsilon undefined at sigma_t = 0");
        return affine2(1.0 / sig, x_t, -std::sqrt(ab) / sig, p.value, "x0_to_epsilon");
    }
    }
    throw DomainError("unknown prediction kind");
}

} // namespace detail

/// Converts between parametrizations at fixed (x_t, t).
inline Prediction convert(const Prediction& p, const Volume& x_t, const NoiseSchedule& s, PredictionKind to) {
    if (p.kind == to) return p;
    const Volume eps = detail::prediction_to_epsilon(p, x_t, s);
    Prediction out{to, {}, p.t};
    switch (to) {
    case PredictionKind::epsilon: out.value = eps; break;
    case PredictionKind::v: out.value = epsilon_to_v(x_t, eps, s, p.t); break;
    case PredictionKind::score: out.value = epsilon_to_score(eps, s, p.t); break;
    case PredictionKind::x0: {
        // x0 = (x_t - sqrt(1 - ab) eps) / sqrt(ab)
        const double ab = s.alpha_bar(p.t);
        out.value = detail::affine2(1.0 / std::sqrt(ab), x_t, -std::sqrt(1.0 - ab) / std::sqrt(ab), eps, "to_x0");
        break;
    }
    }
    return out;
}

} // namespace pfode
