#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "pfode/pipeline.hpp"
#include "support.hpp"

using namespace pfode;
using testing_support::max_abs;
using testing_support::random_volume;

namespace {

PhantomSpec small_spec(std::uint64_t seed = 3) {
    PhantomSpec s;
    s.dims = {32, 32, 32};
    s.shell_thickness = 4;
    s.anomaly_count_min = s.anomaly_count_max = 2;
    s.radius_min = 3;
    s.radius_max = 4;
    s.seed = seed;
    return s;
}

/// Straightforward re-derivation of the fixed-step logistic descent.
ClassifierModel reference_logistic(const std::vector<Features>& x, const std::vector<int>& y,
                                   const ClassifierOptions& opt) {
    const std::size_t n = x.size();
    ClassifierModel m;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        std::vector<double> col;
        for (const auto& f : x) col.push_back(f[j]);
        const double mu = std::accumulate(col.begin(), col.end(), 0.0) / n;
        double ss = 0;
        for (double v : col) ss += (v - mu) * (v - mu);
        m.mean[j] = mu;
        m.scale[j] = ss > 0 ? std::sqrt(ss / n) : 1.0;
    }
    Rng rng(opt.seed);
    for (auto& w : m.weights) w = 0.01 * rng.normal();
    for (int it = 0; it < opt.iterations; ++it) {
        std::array<double, kFeatureCount> grad{};
        double gbias = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = m.predict(x[i]);
            for (std::size_t j = 0; j < kFeatureCount; ++j) grad[j] += (p - y[i]) * (x[i][j] - m.mean[j]) / m.scale[j];
            gbias += p - y[i];
        }
        for (std::size_t j = 0; j < kFeatureCount; ++j)
            m.weights[j] = m.weights[j] - opt.learning_rate * (grad[j] / n + opt.l2 * m.weights[j]);
        m.bias = m.bias - opt.learning_rate * gbias / n;
    }
    return m;
}

std::vector<Features> random_features(std::size_t n, std::uint64_t seed, std::vector<int>* labels, double shift) {
    Rng rng(seed);
    std::vector<Features> out(n);
    labels->assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        (*labels)[i] = i % 2 ? 1 : 0;
        for (auto& f : out[i]) f = rng.normal() + shift * (*labels)[i];
    }
    return out;
}

} // namespace

TEST(Phantoms, DeterministicAndWellFormed) {
    const auto spec = small_spec();
    const auto a = gen_phantoms(spec, 2, 3);
    const auto b = gen_phantoms(spec, 2, 3);
    ASSERT_EQ(a.size(), 5u);
    const Mask shell = shell_mask(spec);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].image, b[i].image);
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(a[i].latent.dims(), (Dims{8, 8, 8}));
        EXPECT_EQ(a[i].edge.edge.dims(), (Dims{8, 8, 8}));
        if (a[i].group == Group::healthy) {
            EXPECT_EQ(a[i].truth.count(), 0u);
            EXPECT_EQ(a[i].magnitude, 0.0);
        } else {
            EXPECT_GT(a[i].truth.count(), 0u);
            EXPECT_GT(a[i].magnitude, 0.0);
            for (std::size_t v = 0; v < shell.volume().size(); ++v) {
                if (a[i].truth[v]) {
                    EXPECT_TRUE(shell[v]);
                }
            }
        }
    }
    EXPECT_EQ(a[0].id, "H0000");
    EXPECT_EQ(a[2].id, "A0000");
    EXPECT_NE(gen_phantoms(small_spec(4), 1, 0)[0].image, a[0].image);
}

TEST(Phantoms, InjectedMassBookkeeping) {
    const auto spec = small_spec();
    const Mask shell = shell_mask(spec);
    for (std::size_t i = 0; i < 4; ++i) {
        const Subject with = make_subject(spec, shell, Group::anomalous, i);
        const Subject base = make_subject(spec, shell, Group::anomalous, i, false);
        // Injected integral over the shell, recomputed from the images outside the shell mask boundary.
        double injected = 0;
        for (std::size_t v = 0; v < with.image.size(); ++v) injected += with.image[v] - base.image[v];
        const double expect = injected / static_cast<double>(shell.count());
        const double gap = masked_mean(with.image, shell) - masked_mean(base.image, shell);
        EXPECT_GT(gap, 0.0);
        EXPECT_LE(std::abs(gap - expect), 0.2 * expect);
        EXPECT_NEAR(with.burden, expect, 1e-4 * expect);
    }
}

TEST(Phantoms, ConfigErrors) {
    auto spec = small_spec();
    spec.shell_thickness = 20;
    EXPECT_THROW(gen_phantoms(spec, 1, 1), ConfigError);
    spec = small_spec();
    spec.magnitude_min = 0;
    EXPECT_THROW(gen_phantoms(spec, 1, 1), ConfigError);
    spec = small_spec();
    spec.dims = {30, 32, 32};
    EXPECT_THROW(gen_phantoms(spec, 1, 1), ConfigError);
    EXPECT_THROW(gen_phantoms(small_spec(), 0, 0), ConfigError);
}

TEST(Regions, LobesPartitionTheShell) {
    const auto spec = small_spec();
    const Mask shell = shell_mask(spec);
    const auto lobes = lobe_regions(spec, shell);
    ASSERT_EQ(lobes.size(), 4u);
    std::size_t total = 0;
    for (const auto& r : lobes) {
        EXPECT_GT(r.mask.count(), 0u);
        total += r.mask.count();
    }
    EXPECT_EQ(total, shell.count());
}

TEST(AnomalyMap, Identities) {
    const Volume lat = random_volume({4, 4, 4}, 1);
    for (const Volume r = anomaly_map(lat, lat, {4}); float x : r.data()) EXPECT_EQ(x, 0.0f);
    const Volume shifted = add(lat, Volume({4, 4, 4}, 1, -0.3f));
    for (const Volume r = anomaly_map(lat, shifted, {4}); float x : r.data()) EXPECT_NEAR(x, 0.3, 1e-6);
    EXPECT_THROW(anomaly_map(lat, Volume({2, 2, 2}), {4}), DimensionError);
}

TEST(Classifier, SeparableTrainingAccuracyIsPerfect) {
    std::vector<int> y;
    auto x = random_features(40, 5, &y, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i][0] = y[i] ? 5.0 + i * 0.01 : -5.0 - i * 0.01;
    const auto m = fit_classifier(x, y);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(m.predict(x[i]) >= 0.5 ? 1 : 0, y[i]);
}

TEST(Classifier, ShuffledLabelsGiveChanceAuc) {
    double total = 0;
    const int reps = 10;
    for (int r = 0; r < reps; ++r) {
        std::vector<int> y;
        auto x = random_features(400, 100 + r, &y, 1.5);
        Rng rng(200 + r);
        for (std::size_t i = y.size(); i > 1; --i)
            std::swap(y[i - 1], y[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        const std::vector<Features> train_x(x.begin(), x.begin() + 200);
        const std::vector<int> train_y(y.begin(), y.begin() + 200);
        const auto m = fit_classifier(train_x, train_y, {500, 0.5, 1e-3, 1});
        std::vector<double> scores;
        std::vector<unsigned char> labels;
        for (std::size_t i = 200; i < 400; ++i) {
            scores.push_back(m.predict(x[i]));
            labels.push_back(static_cast<unsigned char>(y[i]));
        }
        total += roc_auc(scores, labels);
    }
    const double auc = total / reps;
    EXPECT_GE(auc, 0.35);
    EXPECT_LE(auc, 0.65);
}

TEST(Classifier, MatchesIndependentDescent) {
    std::vector<int> y;
    const auto x = random_features(30, 7, &y, 0.8);
    const ClassifierOptions opt{300, 0.3, 1e-2, 11};
    const auto a = fit_classifier(x, y, opt);
    const auto b = reference_logistic(x, y, opt);
    for (std::size_t j = 0; j < kFeatureCount; ++j) EXPECT_NEAR(a.weights[j], b.weights[j], 1e-8);
    EXPECT_NEAR(a.bias, b.bias, 1e-8);
    const auto c = fit_classifier(x, y, opt);
    EXPECT_EQ(a.weights, c.weights);
    EXPECT_EQ(a.bias, c.bias);
}

TEST(Classifier, SingleClassIsRejected) {
    std::vector<Features> x(4);
    EXPECT_THROW(fit_classifier(x, {1, 1, 1, 1}), NumericError);
    EXPECT_THROW(fit_classifier(x, {1, 0}), DimensionError);
}

TEST(AnomalyScore, Examples) {
    EXPECT_DOUBLE_EQ(anomaly_score(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(anomaly_score(4, 0.25), 1.0);
    EXPECT_EQ(anomaly_score(3.7, 0), 0.0);
    EXPECT_EQ(anomaly_score(-2, 0.5), 0.0);
    EXPECT_THROW(anomaly_score(1, 1.5), DomainError);
    EXPECT_DOUBLE_EQ(anomaly_score(0.3, 0.6), anomaly_score(0.6, 0.3));
    double prev = 0;
    for (double m = 0; m <= 1.0; m += 0.1) {
        const double s = anomaly_score(m, 0.7);
        EXPECT_GE(s, prev);
        prev = s;
    }
}

TEST(Evaluate, PerfectCorrelationAndIdenticalGroups) {
    const auto spec = small_spec();
    auto subjects = gen_phantoms(spec, 3, 3);
    const Mask shell = shell_mask(spec);
    auto regions = lobe_regions(spec, shell);
    regions.resize(1);
    std::vector<AnomalyReport> reports(subjects.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        reports[i].score = masked_mean(subjects[i].image, regions[0].mask);
        reports[i].p_cls = i % 2 ? 0.9 : 0.1;
        subjects[i].magnitude = i < 2 ? 1.0 : (i < 4 ? 2.0 : 3.0);
    }
    const auto table = evaluate_cohort(subjects, reports, regions);
    ASSERT_EQ(table.regions.size(), 1u);
    EXPECT_NEAR(table.regions[0].pearson_r, 1.0, 1e-12);
    EXPECT_EQ(table.groups.group_a_n, 3u);
    EXPECT_EQ(table.groups.group_b_n, 3u);
    EXPECT_NEAR(table.groups.neglog10_p, 0.0, 1e-12);
    EXPECT_EQ(regions_csv(table).substr(0, 19), "region,pearson_r,n\n");
    EXPECT_EQ(groups_csv(table), "group_a_n,group_b_n,neglog10_p\n3,3,0.000000\n");
}

TEST(Evaluate, DegenerateRegionBecomesWarning) {
    const auto spec = small_spec();
    const auto subjects = gen_phantoms(spec, 2, 2);
    std::vector<AnomalyReport> reports(subjects.size());
    const std::vector<Region> regions{{"flat", Mask::full(spec.dims)}};
    const auto table = evaluate_cohort(subjects, reports, regions);
    EXPECT_TRUE(table.regions.empty());
    EXPECT_FALSE(table.warnings.empty());
}

TEST(Split, StratifiedAndSeeded) {
    const auto subjects = gen_phantoms(small_spec(), 10, 6);
    const auto a = split_train(subjects, 0.5, 9);
    EXPECT_EQ(a, split_train(subjects, 0.5, 9));
    std::size_t h = 0, an = 0;
    for (std::size_t i = 0; i < subjects.size(); ++i)
        if (a[i]) (subjects[i].group == Group::healthy ? h : an)++;
    EXPECT_EQ(h, 5u);
    EXPECT_EQ(an, 3u);
    EXPECT_THROW(split_train(subjects, 1.5, 9), ConfigError);
}

TEST(ParallelFor, VisitsEachIndexOnceAndRethrows) {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(8, 3, [](std::size_t i) {
                     if (i == 5) throw DomainError("boom");
                 }),
                 DomainError);
}

TEST(Cohort, AnomalousMapMeansExceedHealthyMedian) {
    auto spec = small_spec(21);
    const Cohort c = make_cohort(spec, 8, 6, 0.5);
    const auto healthy = healthy_training_latents(c);
    const Volume tmpl = build_template(healthy);
    const double tau2 = pooled_variance(healthy, tmpl, c.shape);
    EXPECT_GT(tau2, 0.0);
    const auto s = linear_schedule(200, 5e-4, 0.1);
    const MixtureDenoiser den(healthy_oracle(healthy, tmpl, OracleKind::template_gaussian, tau2), s);
    for (auto kind : {SamplerKind::d1, SamplerKind::d2}) {
        const auto recon = reconstruct_all(c.subjects, {kind, 80, 5, std::nullopt}, den, 2);
        std::vector<double> healthy_m, anomalous_m;
        for (std::size_t i = 0; i < c.subjects.size(); ++i) {
            const Volume map = anomaly_map(c.subjects[i].latent, recon[i], spec.codec);
            const double m = m_suvr_of(c.subjects[i], map, c.brain, SuvrReading::anomaly_map);
            (c.subjects[i].group == Group::healthy ? healthy_m : anomalous_m).push_back(m);
        }
        std::sort(healthy_m.begin(), healthy_m.end());
        const double median = 0.5 * (healthy_m[3] + healthy_m[4]);
        for (double m : anomalous_m) EXPECT_GT(m, median) << to_string(kind);
    }
}
