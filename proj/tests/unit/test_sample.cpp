#include <gtest/gtest.h>

#include <cmath>

#include "pfode/sample.hpp"
#include "support.hpp"

using namespace pfode;
using testing_support::max_abs;
using testing_support::max_abs_diff;
using testing_support::random_volume;

namespace {

const Dims kDims{4, 4, 2};

/// v chosen so that the implied epsilon, and hence the score, is zero.
class ZeroScoreDenoiser final : public Denoiser {
public:
    explicit ZeroScoreDenoiser(NoiseSchedule s) : s_(std::move(s)) {}
    Field predict_v_exact(const Volume& x, int t, const Condition& c) const override {
        check_input(x, t, c);
        const double ab = s_.alpha_bar(t);
        Field v(x.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = -std::sqrt((1 - ab) / ab) * x[i];
        return v;
    }
    Field v_vjp(const Volume& x, int t, const Condition&, std::span<const double> c) const override {
        const double ab = s_.alpha_bar(t);
        Field out(x.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = -std::sqrt((1 - ab) / ab) * c[i];
        return out;
    }
    JacobianMode x0_jacobian_mode() const override { return JacobianMode::full; }
    const NoiseSchedule& schedule() const override { return s_; }

private:
    NoiseSchedule s_;
};

} // namespace

TEST(Sampler, ParseNames) {
    EXPECT_EQ(parse_sampler("d1"), SamplerKind::d1);
    EXPECT_EQ(parse_sampler("d2"), SamplerKind::d2);
    EXPECT_EQ(parse_sampler("ancestral"), SamplerKind::ancestral);
    EXPECT_THROW(parse_sampler("ddim"), ConfigError);
    EXPECT_STREQ(to_string(SamplerKind::d2), "d2");
}

TEST(ForwardNoise, ShallowDeterministicAndRange) {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const Volume x0 = random_volume(kDims, 1);
    const Volume a = forward_noise(x0, 1, s, 5);
    EXPECT_LE(max_abs_diff(a, x0), 5 * s.sigma(1));
    EXPECT_EQ(forward_noise(x0, 300, s, 5), forward_noise(x0, 300, s, 5));
    EXPECT_NE(forward_noise(x0, 300, s, 5), forward_noise(x0, 300, s, 6));
    EXPECT_THROW(forward_noise(x0, 0, s, 1), IndexError);
    EXPECT_THROW(forward_noise(x0, 1001, s, 1), IndexError);
}

TEST(ForwardNoise, VarianceMatchesSchedule) {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const Dims d{2, 2, 1};
    const Volume x0 = random_volume(d, 2);
    const int t = 250, n = 10000;
    std::vector<double> sum(4, 0), sum2(4, 0);
    for (int k = 0; k < n; ++k) {
        const Volume x = forward_noise(x0, t, s, static_cast<std::uint64_t>(k) + 1000);
        for (std::size_t i = 0; i < 4; ++i) {
            sum[i] += x[i];
            sum2[i] += static_cast<double>(x[i]) * x[i];
        }
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const double mean = sum[i] / n;
        const double var = (sum2[i] - n * mean * mean) / (n - 1);
        EXPECT_NEAR(var / (1 - s.alpha_bar(t)), 1.0, 0.05) << i;
    }
}

TEST(Steps, ZeroScoreRescalesOnly) {
    const auto s = linear_schedule(50, 1e-3, 0.05);
    const ZeroScoreDenoiser den(s);
    const Volume x = random_volume(kDims, 3);
    const Condition c = Condition::null(kDims);
    for (int t : {1, 20, 50}) {
        const Volume expect = scale(x, 1.0 / std::sqrt(s.alpha(t)));
        EXPECT_LE(max_abs_diff(step_d1(x, t, den, c), expect), 1e-5);
        EXPECT_LE(max_abs_diff(step_d2(x, t, den, c), expect), 1e-5);
    }
    // Ancestral with the noise term removed (t = 1) is the same rescale.
    Rng rng(1);
    EXPECT_LE(max_abs_diff(step_ancestral(x, 1, den, c, rng), scale(x, 1.0 / std::sqrt(s.alpha(1)))), 1e-5);
}

TEST(Steps, FirstStepOfD1IsPureRescale) {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const MixtureDenoiser den(MixtureModel::equal_weights({random_volume(kDims, 4)}, 0.1), s);
    const Volume x = random_volume(kDims, 5);
    const Volume out = step_d1(x, 1, den, Condition::null(kDims));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(out[i], static_cast<float>(x[i] / std::sqrt(s.alpha(1))));
}

TEST(Steps, D2MinusD1IsHalfCoefficientGapTimesScore) {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const MixtureDenoiser den(MixtureModel::equal_weights({random_volume(kDims, 6)}, 0.2), s);
    for (int t : {2, 300, 1000}) {
        const Volume x = random_volume(kDims, 7 + t, -2, 2);
        const Condition c = Condition::null(kDims);
        const Volume diff = sub(step_d2(x, t, den, c), step_d1(x, t, den, c));
        const Volume sc = den.score(x, t);
        for (std::size_t i = 0; i < x.size(); ++i)
            EXPECT_NEAR(diff[i], 0.5 * (g2_sq(s, t) - g1_sq(s, t)) * sc[i], 1e-6) << t;
    }
}

TEST(Steps, AncestralCoefficientEqualsDriftCoefficient) {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    for (int t = 1; t <= 1000; ++t) EXPECT_NEAR(ancestral_score_coef(s, t), g2_sq(s, t), 1e-12) << t;
}

TEST(Steps, AncestralMonteCarloMeanMatchesGaussianPosterior) {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const double tau2 = 0.25;
    const Volume mu = random_volume(kDims, 8);
    const MixtureDenoiser den(MixtureModel::equal_weights({mu}, tau2), s);
    const int t = 200, n = 1000;
    const Volume x = random_volume(kDims, 9, -1, 1);
    const Condition c = Condition::null(kDims);
    Rng rng(10);
    std::vector<double> mean(x.size(), 0.0);
    for (int k = 0; k < n; ++k) {
        const Volume next = step_ancestral(x, t, den, c, rng);
        for (std::size_t i = 0; i < x.size(); ++i) mean[i] += next[i] / n;
    }
    // Closed-form DDPM posterior mean with the exact Gaussian posterior mean of x0.
    const double ab = s.alpha_bar(t), abp = s.alpha_bar(t - 1), a = s.alpha(t), b = s.beta(t);
    const double se = std::sqrt(g1_sq(s, t) / n);
    double avg_dev = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = mu[i] + std::sqrt(ab) * tau2 / (ab * tau2 + 1 - ab) * (x[i] - std::sqrt(ab) * mu[i]);
        const double post = std::sqrt(abp) * b / (1 - ab) * x0 + std::sqrt(a) * (1 - abp) / (1 - ab) * x[i];
        EXPECT_LE(std::abs(mean[i] - post), 4 * se) << i;
        avg_dev += (mean[i] - post) / static_cast<double>(x.size());
    }
    EXPECT_LE(std::abs(avg_dev), 3 * se / std::sqrt(static_cast<double>(x.size())));
}

TEST(Reconstruct, ShallowNoisingKeepsInput) {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const MixtureDenoiser den(MixtureModel::equal_weights({Volume(kDims)}, 1.0), s);
    const Volume input = random_volume(kDims, 11);
    for (auto kind : {SamplerKind::ancestral, SamplerKind::d1, SamplerKind::d2}) {
        const Volume out = reconstruct(input, {kind, 1, 3, std::nullopt}, den, Condition::null(kDims));
        EXPECT_LE(max_abs_diff(out, input), 5 * s.sigma(1) + 1e-3);
    }
}

TEST(Reconstruct, DeterministicRepeats) {
    const auto s = linear_schedule(200, 1e-3, 0.05);
    const MixtureDenoiser den(MixtureModel::equal_weights({random_volume(kDims, 12), random_volume(kDims, 13)}, 0.1),
                              s);
    const Volume input = random_volume(kDims, 14);
    for (auto kind : {SamplerKind::ancestral, SamplerKind::d1, SamplerKind::d2}) {
        const SamplerConfig cfg{kind, 120, 99, std::nullopt};
        EXPECT_EQ(reconstruct(input, cfg, den, Condition::null(kDims)),
                  reconstruct(input, cfg, den, Condition::null(kDims)));
    }
    EXPECT_THROW(reconstruct(input, {SamplerKind::d1, 0, 1, std::nullopt}, den, Condition::null(kDims)), ConfigError);
    EXPECT_THROW(reconstruct(input, {SamplerKind::d1, 201, 1, std::nullopt}, den, Condition::null(kDims)), ConfigError);
}

TEST(Reconstruct, SingleComponentOracleRecoversHealthyInput) {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const Dims d{8, 8, 8};
    Volume mu(d, 1, 1.0f);
    for (std::size_t i = 0; i < mu.size(); i += 2) mu[i] = 0.6f;
    const double tau2 = 1e-4;
    const MixtureDenoiser den(MixtureModel::equal_weights({mu}, tau2), s);
    Rng rng(15);
    Volume input = mu;
    for (auto& x : input.data()) x = static_cast<float>(x + std::sqrt(tau2) * rng.normal());
    for (auto kind : {SamplerKind::ancestral, SamplerKind::d1, SamplerKind::d2}) {
        const Volume out = reconstruct(input, {kind, 400, 16, std::nullopt}, den, Condition::null(d));
        double num = 0, den2 = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            num += (out[i] - input[i]) * (out[i] - input[i]);
            den2 += static_cast<double>(input[i]) * input[i];
        }
        EXPECT_LE(std::sqrt(num / den2), 0.05) << to_string(kind);
        EXPECT_GT(max_abs(out), 0.0);
    }
}
