#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pfode/error.hpp"
#include "pfode/volume.hpp"

namespace pfode {

/// Discrete variance-preserving schedule over t = 1..T, with alpha_bar(0) == 1.
class NoiseSchedule {
public:
    /// `betas[i]` is beta at t = i + 1. Requires 0 < beta < 1, strictly increasing.
    static NoiseSchedule from_betas(std::vector<double> betas) {
        if (betas.size() < 2) throw ConfigError("schedule: need T >= 2");
        for (std::size_t i = 0; i < betas.size(); ++i) {
            if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw ConfigError("schedule: beta outside (0, 1)");
            if (i > 0 && !(betas[i] > betas[i - 1])) throw ConfigError("schedule: beta must increase strictly");
        }
        NoiseSchedule s;
        s.beta_.assign(1, 0.0);
        s.beta_.insert(s.beta_.end(), betas.begin(), betas.end());
        s.alpha_bar_.assign(s.beta_.size(), 1.0);
        for (std::size_t t = 1; t < s.beta_.size(); ++t) s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t]);
        return s;
    }

    [[nodiscard]] int steps() const noexcept { return static_cast<int>(beta_.size()) - 1; }

    [[nodiscard]] double beta(int t) const { return beta_[check(t, 1)]; }
    [[nodiscard]] double alpha(int t) const { return 1.0 - beta_[check(t, 1)]; }
    [[nodiscard]] double alpha_bar(int t) const { return alpha_bar_[check(t, 0)]; }
    [[nodiscard]] double sigma(int t) const { return std::sqrt(1.0 - alpha_bar_[check(t, 0)]); }

    /// The conventions that make a schedule usable for sampling: terminal alpha_bar below 0.05.
    [[nodiscard]] bool reaches_noise() const noexcept { return alpha_bar_.back() < 0.05; }

private:
    NoiseSchedule() = default;

    [[nodiscard]] std::size_t check(int t, int lo) const {
        if (t < lo || t > steps())
            throw IndexError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                             std::to_string(steps()) + "]");
        return static_cast<std::size_t>(t);
    }

    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
};

/// Betas linearly interpolated from beta_1 to beta_T, endpoints inclusive.
inline NoiseSchedule linear_schedule(int T, double beta_1, double beta_T) {
    if (T < 2) throw ConfigError("linear_schedule: T must be >= 2");
    if (!(0.0 < beta_1 && beta_1 < beta_T && beta_T < 1.0))
        throw ConfigError("linear_schedule: need 0 < beta_start < beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i)
        betas[static_cast<std::size_t>(i)] = beta_1 + (beta_T - beta_1) * static_cast<double>(i) / (T - 1);
    return NoiseSchedule::from_betas(std::move(betas));
}

/// Squared ancestral noise coefficient (1 - ab[t-1]) / (1 - ab[t]) * (1 - a[t]); zero at t = 1.
inline double g1_sq(const NoiseSchedule& s, int t) {
    const double ab = s.alpha_bar(t);
    return (1.0 - s.alpha_bar(t - 1)) / (1.0 - ab) * (1.0 - s.alpha(t));
}

/// Squared drift-derived coefficient (1 - a[t]) / sqrt(a[t]).
inline double g2_sq(const NoiseSchedule& s, int t) {
    const double a = s.alpha(t);
    return (1.0 - a) / std::sqrt(a);
}

/// Discrete drift f(x, t) = (1 - 1/sqrt(a[t])) x, so that x - f = x / sqrt(a[t]).
inline Volume drift_disc(const NoiseSchedule& s, int t, const Volume& x) {
    const double c = 1.0 - 1.0 / std::sqrt(s.alpha(t));
    Volume out(x.dims(), x.channels());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(c * x[i]);
    return out;
}

} // namespace pfode
