#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfode/error.hpp"
#include "pfode/io.hpp"
#include "pfode/parametrize.hpp"
#include "pfode/rng.hpp"
#include "pfode/schedule.hpp"
#include "pfode/volume.hpp"

namespace pfode {

/// Structural condition concatenated to the denoiser input as an extra channel.
/// The null condition is an all-zero edge volume.
struct Condition {
    Volume edge;

    static Condition null(Dims d) { return Condition{Volume(d)}; }
};

enum class JacobianMode { full, stop_gradient };

using Field = std::vector<double>;

/// A v-prediction model. Implementations are immutable and safe to call concurrently.
/// The double-precision entry points exist for gradients and finite-difference checks.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    [[nodiscard]] virtual Field predict_v_exact(const Volume& x_t, int t, const Condition& cond) const = 0;

    /// (dv/dx_t)^T * cotangent.
    [[nodiscard]] virtual Field v_vjp(const Volume& x_t, int t, const Condition& cond,
                                      std::span<const double> cotangent) const = 0;

    /// (dx0_hat/dx_t)^T * cotangent, where x0_hat = sqrt(ab) x_t - sqrt(1 - ab) v.
    [[nodiscard]] virtual Field x0_vjp(const Volume& x_t, int t, const Condition& cond,
                                       std::span<const double> cotangent) const {
        const double ab = schedule().alpha_bar(t);
        Field out = v_vjp(x_t, t, cond, cotangent);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = std::sqrt(ab) * cotangent[i] - std::sqrt(1.0 - ab) * out[i];
        return out;
    }

    [[nodiscard]] virtual JacobianMode x0_jacobian_mode() const = 0;

    [[nodiscard]] virtual const NoiseSchedule& schedule() const = 0;

    [[nodiscard]] Volume predict_v(const Volume& x_t, int t, const Condition& cond) const {
        const Field v = predict_v_exact(x_t, t, cond);
        Volume out(x_t.dims());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
        detail::require_finite(out, "predict_v");
        return out;
    }

    /// x0_hat in double precision.
    [[nodiscard]] Field predict_x0_exact(const Volume& x_t, int t, const Condition& cond) const {
        const double ab = schedule().alpha_bar(t);
        Field v = predict_v_exact(x_t, t, cond);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(ab) * x_t[i] - std::sqrt(1.0 - ab) * v[i];
        return v;
    }

protected:
    void check_input(const Volume& x_t, int t, const Condition& cond) const {
        if (x_t.channels() != 1) throw DimensionError("denoiser input must be single-channel");
        if (t < 1 || t > schedule().steps())
            throw IndexError("denoiser timestep " + std::to_string(t) + " outside [1, " +
                             std::to_string(schedule().steps()) + "]");
        if (!cond.edge.empty() && cond.edge.dims() != x_t.dims())
            throw DimensionError("condition dims " + to_string(cond.edge.dims()) + " differ from input " +
                                 to_string(x_t.dims()));
    }
};

// ---------------------------------------------------------------------------
// Gaussian mixture oracle

/// p_0 = sum_k w_k N(mu_k, tau2 I).
struct MixtureModel {
    std::vector<double> weights;
    std::vector<Volume> means;
    double tau2 = 1.0;

    void validate() const {
        if (means.empty() || means.size() != weights.size())
            throw ConfigError("mixture: need one weight per component and at least one component");
        double total = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) throw ConfigError("mixture: weights must be positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture: weights must sum to 1");
        if (!(tau2 > 0.0)) throw ConfigError("mixture: tau2 must be positive");
        for (const auto& m : means)
            if (m.dims() != means.front().dims() || m.channels() != 1)
                throw DimensionError("mixture: component means must share single-channel dims");
    }

    [[nodiscard]] Dims dims() const { return means.front().dims(); }

    /// Equal-weight mixture centred on each given volume.
    static MixtureModel equal_weights(std::vector<Volume> centres, double tau2) {
        MixtureModel m;
        m.weights.assign(centres.size(), 1.0 / static_cast<double>(centres.size()));
        m.means = std::move(centres);
        m.tau2 = tau2;
        m.validate();
        return m;
    }
};

/// Exact v-prediction for the noised mixture p_t = sum_k w_k N(sqrt(ab) mu_k, (ab tau2 + 1 - ab) I).
/// The condition is accepted for interface compatibility and ignored.
class MixtureDenoiser final : public Denoiser {
public:
    MixtureDenoiser(MixtureModel model, NoiseSchedule schedule)
        : model_(std::move(model)), schedule_(std::move(schedule)) {
        model_.validate();
    }

    [[nodiscard]] const MixtureModel& model() const noexcept { return model_; }
    [[nodiscard]] const NoiseSchedule& schedule() const override { return schedule_; }
    [[nodiscard]] JacobianMode x0_jacobian_mode() const override { return JacobianMode::full; }

    /// Analytic score of p_t at x_t.
    [[nodiscard]] Volume score(const Volume& x_t, int t) const {
        const auto st = state(x_t, t);
        Volume out(x_t.dims());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(st.score[i]);
        return out;
    }

    /// log p_t(x_t), used by finite-difference checks.
    [[nodiscard]] double log_density(const Volume& x_t, int t) const {
        const double ab = schedule_.alpha_bar(t);
        const double s2 = ab * model_.tau2 + 1.0 - ab;
        const double n = static_cast<double>(x_t.size());
        const auto logits = component_logits(x_t, std::sqrt(ab), s2);
        return log_sum_exp(logits) - 0.5 * n * std::log(2.0 * std::numbers::pi * s2);
    }

    [[nodiscard]] Field predict_v_exact(const Volume& x_t, int t, const Condition& cond) const override {
        check_input(x_t, t, cond);
        const auto st = state(x_t, t);
        // eps = -sigma S, then v = (eps - sigma x) / sqrt(ab)
        Field out(x_t.size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (-st.sigma * st.score[i] - st.sigma * x_t[i]) / st.sqrt_ab;
        return out;
    }

    [[nodiscard]] Field v_vjp(const Volume& x_t, int t, const Condition& cond,
                              std::span<const double> cotangent) const override {
        check_input(x_t, t, cond);
        const auto st = state(x_t, t);
        Field hc = score_jacobian_product(x_t, st, cotangent);
        // dv/dx = -sigma (dS/dx + I) / sqrt(ab)
        for (std::size_t i = 0; i < hc.size(); ++i) hc[i] = -st.sigma * (hc[i] + cotangent[i]) / st.sqrt_ab;
        return hc;
    }

    /// Tweedie form x0_hat = (x + (1 - ab) S) / sqrt(ab) avoids cancellation.
    [[nodiscard]] Field x0_vjp(const Volume& x_t, int t, const Condition& cond,
                               std::span<const double> cotangent) const override {
        check_input(x_t, t, cond);
        const auto st = state(x_t, t);
        const double one_m_ab = st.sigma * st.sigma;
        Field hc = score_jacobian_product(x_t, st, cotangent);
        for (std::size_t i = 0; i < hc.size(); ++i) hc[i] = (cotangent[i] + one_m_ab * hc[i]) / st.sqrt_ab;
        return hc;
    }

private:
    struct State {
        double sqrt_ab = 1.0, sigma = 0.0, s2 = 1.0;
        std::vector<double> resp;
        std::vector<double> score;
    };

    static double log_sum_exp(const std::vector<double>& v) {
        const double m = *std::max_element(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += std::exp(x - m);
        return m + std::log(s);
    }

    /// dS/dx = -I/s2 + sum_k r_k u_k u_k^T - S S^T with u_k = (sqrt(ab) mu_k - x)/s2; symmetric.
    [[nodiscard]] Field score_jacobian_product(const Volume& x_t, const State& st, std::span<const double> c) const {
        const std::size_t n = x_t.size();
        if (c.size() != n) throw DimensionError("vjp: cotangent length differs from input");
        const double sab = st.sqrt_ab;
        const double inv_s2 = 1.0 / st.s2;
        Field hc(n);
        double s_dot_c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            hc[i] = -c[i] * inv_s2;
            s_dot_c += st.score[i] * c[i];
        }
        for (std::size_t k = 0; k < model_.means.size(); ++k) {
            if (st.resp[k] == 0.0) continue;
            const auto& mu = model_.means[k];
            double u_dot_c = 0.0;
            for (std::size_t i = 0; i < n; ++i) u_dot_c += (sab * mu[i] - x_t[i]) * inv_s2 * c[i];
            const double coef = st.resp[k] * u_dot_c;
            for (std::size_t i = 0; i < n; ++i) hc[i] += coef * (sab * mu[i] - x_t[i]) * inv_s2;
        }
        for (std::size_t i = 0; i < n; ++i) hc[i] -= st.score[i] * s_dot_c;
        return hc;
    }

    [[nodiscard]] std::vector<double> component_logits(const Volume& x_t, double sab, double s2) const {
        if (x_t.dims() != model_.dims()) throw DimensionError("mixture: input dims differ from model");
        std::vector<double> logits(model_.means.size());
        for (std::size_t k = 0; k < logits.size(); ++k) {
            const auto& mu = model_.means[k];
            double d2 = 0.0;
            for (std::size_t i = 0; i < x_t.size(); ++i) {
                const double d = x_t[i] - sab * mu[i];
                d2 += d * d;
            }
            logits[k] = std::log(model_.weights[k]) - 0.5 * d2 / s2;
        }
        return logits;
    }

    [[nodiscard]] State state(const Volume& x_t, int t) const {
        State st;
        const double ab = schedule_.alpha_bar(t);
        st.sqrt_ab = std::sqrt(ab);
        st.sigma = std::sqrt(1.0 - ab);
        st.s2 = ab * model_.tau2 + 1.0 - ab;
        const auto logits = component_logits(x_t, st.sqrt_ab, st.s2);
        const double lse = log_sum_exp(logits);
        st.resp.resize(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k) st.resp[k] = std::exp(logits[k] - lse);

        // S = (sqrt(ab) sum_k r_k mu_k - x) / s2
        st.score.assign(x_t.size(), 0.0);
        for (std::size_t k = 0; k < logits.size(); ++k) {
            if (st.resp[k] == 0.0) continue;
            const auto& mu = model_.means[k];
            for (std::size_t i = 0; i < x_t.size(); ++i) st.score[i] += st.resp[k] * mu[i];
        }
        for (std::size_t i = 0; i < x_t.size(); ++i) st.score[i] = (st.sqrt_ab * st.score[i] - x_t[i]) / st.s2;
        return st;
    }

    MixtureModel model_;
    NoiseSchedule schedule_;
};

// ---------------------------------------------------------------------------
// Local-linear ridge denoiser: one 3x3x3 convolution per time bucket over
// (x_t, edge), plus bias and the schedule features sqrt(ab), sqrt(1 - ab).

inline constexpr std::size_t kStencil = 27;
inline constexpr std::size_t kInputChannels = 2;

constexpr std::size_t local_linear_width(std::size_t in_channels) { return kStencil * in_channels + 3; }

namespace detail {

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

/// Replicate-padded source index for stencil offset o (dz-major, dx-fastest) at voxel (x, y, z).
inline std::size_t stencil_source(const Dims& d, std::size_t x, std::size_t y, std::size_t z, std::size_t o) {
    const auto dx = static_cast<std::ptrdiff_t>(o % 3) - 1;
    const auto dy = static_cast<std::ptrdiff_t>((o / 3) % 3) - 1;
    const auto dz = static_cast<std::ptrdiff_t>(o / 9) - 1;
    return d.index(clamp_index(static_cast<std::ptrdiff_t>(x) + dx, d.nx),
                   clamp_index(static_cast<std::ptrdiff_t>(y) + dy, d.ny),
                   clamp_index(static_cast<std::ptrdiff_t>(z) + dz, d.nz));
}

/// Stacks x_t and the edge condition as input channels.
inline std::array<const Volume*, kInputChannels> input_channels(const Volume& x_t, const Condition& cond,
                                                                const Volume& zeros) {
    return {&x_t, cond.edge.empty() ? &zeros : &cond.edge};
}

} // namespace detail

/// Feature row for voxel (x, y, z): 27 x_t taps, 27 edge taps, 1, sqrt(ab), sqrt(1 - ab).
inline void local_linear_features(const Volume& x_t, const Volume& edge, double alpha_bar, std::size_t x,
                                  std::size_t y, std::size_t z, std::span<double> row) {
    const auto& d = x_t.dims();
    for (std::size_t o = 0; o < kStencil; ++o) {
        const std::size_t src = detail::stencil_source(d, x, y, z, o);
        row[o] = x_t[src];
        row[kStencil + o] = edge[src];
    }
    row[2 * kStencil] = 1.0;
    row[2 * kStencil + 1] = std::sqrt(alpha_bar);
    row[2 * kStencil + 2] = std::sqrt(1.0 - alpha_bar);
}

class LocalLinearDenoiser final : public Denoiser {
public:
    LocalLinearDenoiser(NoiseSchedule schedule, double lambda, std::vector<std::vector<double>> bucket_weights)
        : schedule_(std::move(schedule)), lambda_(lambda), weights_(std::move(bucket_weights)) {
        if (weights_.empty()) throw ConfigError("local-linear: need at least one bucket");
        if (weights_.size() > static_cast<std::size_t>(schedule_.steps()))
            throw ConfigError("local-linear: more buckets than timesteps");
        for (const auto& w : weights_)
            if (w.size() != local_linear_width(kInputChannels))
                throw ConfigError("local-linear: bucket weight count must be 27*C_in + 3");
    }

    [[nodiscard]] const NoiseSchedule& schedule() const override { return schedule_; }
    [[nodiscard]] JacobianMode x0_jacobian_mode() const override { return JacobianMode::full; }
    [[nodiscard]] std::size_t buckets() const noexcept { return weights_.size(); }
    [[nodiscard]] double lambda() const noexcept { return lambda_; }
    [[nodiscard]] const std::vector<double>& weights(std::size_t bucket) const { return weights_.at(bucket); }

    /// Buckets partition 1..T into equal-width contiguous ranges.
    [[nodiscard]] std::size_t bucket_of(int t) const { return bucket_index(t, schedule_.steps(), buckets()); }

    static std::size_t bucket_index(int t, int steps, std::size_t buckets) {
        return static_cast<std::size_t>(t - 1) * buckets / static_cast<std::size_t>(steps);
    }

    [[nodiscard]] Field predict_v_exact(const Volume& x_t, int t, const Condition& cond) const override {
        check_input(x_t, t, cond);
        const auto& w = weights_[bucket_of(t)];
        const double ab = schedule_.alpha_bar(t);
        const double offset = w[2 * kStencil] + w[2 * kStencil + 1] * std::sqrt(ab) +
                              w[2 * kStencil + 2] * std::sqrt(1.0 - ab);
        const Volume zeros = cond.edge.empty() ? Volume(x_t.dims()) : Volume();
        const auto inputs = detail::input_channels(x_t, cond, zeros);
        const auto& d = x_t.dims();
        Field out(x_t.size());
        for (std::size_t z = 0; z < d.nz; ++z)
            for (std::size_t y = 0; y < d.ny; ++y)
                for (std::size_t x = 0; x < d.nx; ++x) {
                    double acc = offset;
                    for (std::size_t o = 0; o < kStencil; ++o) {
                        const std::size_t src = detail::stencil_source(d, x, y, z, o);
                        for (std::size_t c = 0; c < kInputChannels; ++c) acc += w[c * kStencil + o] * (*inputs[c])[src];
                    }
                    out[d.index(x, y, z)] = acc;
                }
        return out;
    }

    /// Adjoint of the x_t taps of the replicate-padded convolution.
    [[nodiscard]] Field v_vjp(const Volume& x_t, int t, const Condition& cond,
                              std::span<const double> cotangent) const override {
        check_input(x_t, t, cond);
        if (cotangent.size() != x_t.size()) throw DimensionError("vjp: cotangent length differs from input");
        const auto& w = weights_[bucket_of(t)];
        const auto& d = x_t.dims();
        Field acc(x_t.size(), 0.0);
        for (std::size_t z = 0; z < d.nz; ++z)
            for (std::size_t y = 0; y < d.ny; ++y)
                for (std::size_t x = 0; x < d.nx; ++x) {
                    const double c = cotangent[d.index(x, y, z)];
                    for (std::size_t o = 0; o < kStencil; ++o) acc[detail::stencil_source(d, x, y, z, o)] += w[o] * c;
                }
        return acc;
    }

private:
    NoiseSchedule schedule_;
    double lambda_;
    std::vector<std::vector<double>> weights_;
};

/// One noised training example inside a bucket.
struct TrainingDraw {
    std::size_t volume = 0;
    int t = 1;
    Volume eps;
};

/// Seeded draws for one bucket: for each volume in order, `per_volume` pairs of (t, eps).
inline std::vector<TrainingDraw> sample_training_draws(std::size_t n_volumes, Dims dims, const NoiseSchedule& s,
                                                       std::size_t buckets, std::size_t bucket,
                                                       std::size_t per_volume, std::uint64_t seed) {
    const int T = s.steps();
    const int t_lo = static_cast<int>(bucket * static_cast<std::size_t>(T) / buckets) + 1;
    const int t_hi = static_cast<int>((bucket + 1) * static_cast<std::size_t>(T) / buckets);
    Rng rng(mix_seed(seed, bucket));
    std::vector<TrainingDraw> draws;
    draws.reserve(n_volumes * per_volume);
    for (std::size_t i = 0; i < n_volumes; ++i)
        for (std::size_t j = 0; j < per_volume; ++j) {
            TrainingDraw d;
            d.volume = i;
            d.t = rng.uniform_int(t_lo, t_hi);
            d.eps = rng.normal_volume(dims);
            draws.push_back(std::move(d));
        }
    return draws;
}

/// Minimises mean squared v-error + lambda * |w|^2 (bias unpenalised) over the given draws.
inline std::vector<double> solve_bucket_ridge(const std::vector<Volume>& latents, const std::vector<Condition>& conds,
                                              const std::vector<TrainingDraw>& draws, const NoiseSchedule& s,
                                              double lambda) {
    constexpr std::size_t P = local_linear_width(kInputChannels);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(P, P);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(P);
    std::vector<double> row(P);
    double rows = 0.0;
    for (const auto& draw : draws) {
        const Volume& x0 = latents.at(draw.volume);
        const Volume& edge = conds.at(draw.volume).edge;
        const Volume x_t = noise_with(x0, draw.eps, s, draw.t);
        const Volume target = true_v(x0, draw.eps, s, draw.t);
        const double ab = s.alpha_bar(draw.t);
        const auto& d = x0.dims();
        for (std::size_t z = 0; z < d.nz; ++z)
            for (std::size_t y = 0; y < d.ny; ++y)
                for (std::size_t x = 0; x < d.nx; ++x) {
                    local_linear_features(x_t, edge, ab, x, y, z, row);
                    const Eigen::Map<const Eigen::VectorXd> phi(row.data(), P);
                    gram.selfadjointView<Eigen::Lower>().rankUpdate(phi);
                    rhs += phi * static_cast<double>(target[d.index(x, y, z)]);
                    rows += 1.0;
                }
    }
    Eigen::MatrixXd a = gram.selfadjointView<Eigen::Lower>();
    a /= rows;
    rhs /= rows;
    for (std::size_t i = 0; i < P; ++i)
        if (i != 2 * kStencil) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericError("local-linear: singular normal equations (raise lambda)");
    const Eigen::VectorXd w = ldlt.solve(rhs);
    if (!w.allFinite()) throw NumericError("local-linear: non-finite ridge solution");
    return {w.data(), w.data() + w.size()};
}

struct LocalLinearFitOptions {
    std::size_t buckets = 10;
    double lambda = 1e-3;
    std::size_t draws_per_volume = 4;
    std::uint64_t seed = 0;
};

inline LocalLinearDenoiser fit_local_linear(const std::vector<Volume>& healthy_latents,
                                            const std::vector<Condition>& conds, const NoiseSchedule& s,
                                            const LocalLinearFitOptions& opt) {
    if (healthy_latents.size() < 2) throw ConfigError("fit_local_linear: need at least 2 training volumes");
    if (conds.size() != healthy_latents.size()) throw DimensionError("fit_local_linear: one condition per volume");
    if (opt.buckets < 1 || opt.buckets > static_cast<std::size_t>(s.steps()))
        throw ConfigError("fit_local_linear: buckets must be in [1, T]");
    if (!(opt.lambda > 0.0)) throw ConfigError("fit_local_linear: lambda must be positive");
    const Dims d = healthy_latents.front().dims();
    for (std::size_t i = 0; i < healthy_latents.size(); ++i) {
        if (healthy_latents[i].dims() != d || conds[i].edge.dims() != d)
            throw DimensionError("fit_local_linear: training volumes and conditions must share dims");
    }
    std::vector<std::vector<double>> weights;
    for (std::size_t b = 0; b < opt.buckets; ++b) {
        const auto draws = sample_training_draws(healthy_latents.size(), d, s, opt.buckets, b, opt.draws_per_volume,
                                                 opt.seed);
        weights.push_back(solve_bucket_ridge(healthy_latents, conds, draws, s, opt.lambda));
    }
    return LocalLinearDenoiser(s, opt.lambda, std::move(weights));
}

// TAUW: "TAUW" u32 version, u32 buckets, u32 in_channels, u32 weights_per_bucket,
// u32 T, f64 lambda, f64 beta[T], then buckets * weights_per_bucket f64.
inline constexpr std::uint32_t kTauwVersion = 1;

inline std::vector<unsigned char> encode_tauw(const LocalLinearDenoiser& den) {
    io::ByteWriter w;
    w.put_magic("TAUW");
    w.put<std::uint32_t>(kTauwVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(den.buckets()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(kInputChannels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(local_linear_width(kInputChannels)));
    const auto& s = den.schedule();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.steps()));
    w.put<double>(den.lambda());
    for (int t = 1; t <= s.steps(); ++t) w.put<double>(s.beta(t));
    for (std::size_t b = 0; b < den.buckets(); ++b)
        for (double x : den.weights(b)) w.put<double>(x);
    return w.bytes();
}

inline LocalLinearDenoiser decode_tauw(std::vector<unsigned char> bytes, const std::string& source = "<memory>") {
    io::ByteReader r(std::move(bytes), source);
    r.expect_magic("TAUW");
    if (const auto v = r.get<std::uint32_t>(); v != kTauwVersion)
        throw IoError(source + ": unsupported TAUW version " + std::to_string(v));
    const auto buckets = r.get<std::uint32_t>();
    const auto channels = r.get<std::uint32_t>();
    const auto width = r.get<std::uint32_t>();
    if (channels != kInputChannels || width != local_linear_width(kInputChannels))
        throw IoError(source + ": unexpected channel layout");
    const auto T = r.get<std::uint32_t>();
    if (T < 2 || T > 10'000'000) throw IoError(source + ": implausible timestep count");
    const double lambda = r.get<double>();
    std::vector<double> betas(T);
    for (auto& b : betas) b = r.get<double>();
    std::vector<std::vector<double>> weights(buckets, std::vector<double>(width));
    for (auto& bw : weights)
        for (auto& x : bw) x = r.get<double>();
    r.expect_end();
    try {
        return LocalLinearDenoiser(NoiseSchedule::from_betas(std::move(betas)), lambda, std::move(weights));
    } catch (const ConfigError& e) {
        throw IoError(source + ": " + e.what());
    }
}

inline void write_tauw(const std::filesystem::path& path, const LocalLinearDenoiser& den) {
    io::atomic_write(path, encode_tauw(den));
}

inline LocalLinearDenoiser read_tauw(const std::filesystem::path& path) {
    return decode_tauw(io::read_file(path), path.string());
}

} // namespace pfode
