#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "pfode/denoise.hpp"
#include "pfode/guide.hpp"
#include "pfode/parametrize.hpp"
#include "pfode/rng.hpp"
#include "pfode/schedule.hpp"

namespace pfode {

enum class SamplerKind { ancestral, d1, d2 };

inline SamplerKind parse_sampler(const std::string& s) {
    if (s == "ancestral") return SamplerKind::ancestral;
    if (s == "d1") return SamplerKind::d1;
    if (s == "d2") return SamplerKind::d2;
    throw ConfigError("unknown sampler '" + s + "' (expected ancestral|d1|d2)");
}

inline const char* to_string(SamplerKind k) {
    switch (k) {
    case SamplerKind::ancestral: return "ancestral";
    case SamplerKind::d1: return "d1";
    case SamplerKind::d2: return "d2";
    }
    return "?";
}

struct SamplerConfig {
    SamplerKind kind = SamplerKind::d1;
    int t_start = 400;
    /// Seeds the forward noising; ancestral steps draw from a derived stream.
    std::uint64_t seed = 0;
    std::optional<GuidanceSpec> guidance;
};

inline Volume forward_noise(const Volume& x0, int t, const NoiseSchedule& s, std::uint64_t seed) {
    if (t < 1 || t > s.steps()) throw IndexError("forward_noise: t outside [1, T]");
    Rng rng(seed);
    return noise_with(x0, rng.normal_volume(x0.dims(), x0.channels()), s, t);
}

/// Score estimate from the denoiser, with the guidance term folded into epsilon when active.
inline Volume guided_score(const Volume& x_t, int t, const Denoiser& den, const Condition& cond,
                           const GuidanceSpec* guidance) {
    const auto& s = den.schedule();
    const Volume v = den.predict_v(x_t, t, cond);
    Volume eps = v_to_epsilon(x_t, v, s, t);
    if (guidance && guidance->active_at(t))
        eps = assemble_guided_epsilon(eps, grad_g(x_t, t, *guidance, den, cond), guidance->nu, s, t);
    return epsilon_to_score(eps, s, t);
}

namespace detail {

/// x / sqrt(a_t) + coef * S (+ noise_scale * eps)
inline Volume reverse_update(const Volume& x, const Volume& score, double alpha, double coef) {
    require_same_shape(x, score, "reverse_step");
    const double inv = 1.0 / std::sqrt(alpha);
    Volume out(x.dims(), x.channels());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(inv * x[i] + coef * score[i]);
    require_finite(out, "reverse_step");
    return out;
}

} // namespace detail

/// Score coefficient of the exact ancestral step: (1-ab[t])/(1-ab[t-1]) / sqrt(a[t]) * G1^2.
/// At t = 1 the 0/0 form is replaced by its limit G2^2.
inline double ancestral_score_coef(const NoiseSchedule& s, int t) {
    if (t == 1) return g2_sq(s, 1);
    return (1.0 - s.alpha_bar(t)) / (1.0 - s.alpha_bar(t - 1)) / std::sqrt(s.alpha(t)) * g1_sq(s, t);
}

inline Volume step_ancestral(const Volume& x_t, int t, const Denoiser& den, const Condition& cond, Rng& rng,
                             const GuidanceSpec* guidance = nullptr) {
    const auto& s = den.schedule();
    const Volume score = guided_score(x_t, t, den, cond, guidance);
    Volume out = detail::reverse_update(x_t, score, s.alpha(t), ancestral_score_coef(s, t));
    if (t > 1) {
        const double g1 = std::sqrt(g1_sq(s, t));
        for (auto& x : out.data()) x = static_cast<float>(x + g1 * rng.normal());
    }
    return out;
}

/// Deterministic step x_{t-1} = x_t - f + 1/2 G1^2 S.
inline Volume step_d1(const Volume& x_t, int t, const Denoiser& den, const Condition& cond,
                      const GuidanceSpec* guidance = nullptr) {
    const auto& s = den.schedule();
    return detail::reverse_update(x_t, guided_score(x_t, t, den, cond, guidance), s.alpha(t), 0.5 * g1_sq(s, t));
}

/// Deterministic step x_{t-1} = x_t - f + 1/2 G2^2 S.
inline Volume step_d2(const Volume& x_t, int t, const Denoiser& den, const Condition& cond,
                      const GuidanceSpec* guidance = nullptr) {
    const auto& s = den.schedule();
    return detail::reverse_update(x_t, guided_score(x_t, t, den, cond, guidance), s.alpha(t), 0.5 * g2_sq(s, t));
}

/// Runs the reverse process from `x` at `t_from` down to t = 0.
inline Volume run_reverse(Volume x, int t_from, SamplerKind kind, const Denoiser& den, const Condition& cond,
                          const GuidanceSpec* guidance, std::uint64_t ancestral_seed) {
    Rng rng(ancestral_seed);
    for (int t = t_from; t >= 1; --t) {
        switch (kind) {
        case SamplerKind::ancestral: x = step_ancestral(x, t, den, cond, rng, guidance); break;
        case SamplerKind::d1: x = step_d1(x, t, den, cond, guidance); break;
        case SamplerKind::d2: x = step_d2(x, t, den, cond, guidance); break;
        }
    }
    return x;
}

/// Pseudo-healthy reconstruction: noise the input to t_start, then reverse to t = 0.
inline Volume reconstruct(const Volume& input, const SamplerConfig& cfg, const Denoiser& den, const Condition& cond) {
    const auto& s = den.schedule();
    if (cfg.t_start < 1 || cfg.t_start > s.steps()) throw ConfigError("reconstruct: t_start outside [1, T]");
    const GuidanceSpec* guidance = nullptr;
    if (cfg.guidance) {
        cfg.guidance->validate(input.dims());
        guidance = &*cfg.guidance;
    }
    const Volume x = forward_noise(input, cfg.t_start, s, cfg.seed);
    return run_reverse(x, cfg.t_start, cfg.kind, den, cond, guidance, mix_seed(cfg.seed, 1));
}

} // namespace pfode
