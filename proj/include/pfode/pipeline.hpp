#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pfode/codec.hpp"
#include "pfode/denoise.hpp"
#include "pfode/guide.hpp"
#include "pfode/rng.hpp"
#include "pfode/sample.hpp"
#include "pfode/stats.hpp"
#include "pfode/volume.hpp"

namespace pfode {

// ---------------------------------------------------------------------------
// Synthetic phantoms

/// Ellipsoidal cortical shell with smooth healthy variability and spherical anomalies.
struct PhantomSpec {
    Dims dims{64, 64, 64};
    LatentCodecSpec codec{};
    /// Outer ellipsoid radii as fractions of the half-extent per axis.
    std::array<double, 3> radii{0.82, 0.72, 0.78};
    double shell_thickness = 8.0;
    double cortex_level = 1.0;
    double interior_level = 0.55;
    /// Std of the global intensity factor, linear gradient, and per-voxel texture.
    double global_sd = 0.005;
    double gradient_sd = 0.03;
    double texture_sd = 0.02;
    int anomaly_count_min = 4;
    int anomaly_count_max = 4;
    double radius_min = 6.0;
    double radius_max = 7.0;
    double magnitude_min = 0.1;
    double magnitude_max = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        (void)latent_dims(dims, codec);
        if (shell_thickness <= 0.0) throw ConfigError("phantom: shell_thickness must be positive");
        for (double r : radii)
            if (!(r > 0.0 && r <= 1.0)) throw ConfigError("phantom: radii fractions must lie in (0, 1]");
        if (anomaly_count_min < 1 || anomaly_count_max < anomaly_count_min)
            throw ConfigError("phantom: need 1 <= anomaly_count_min <= anomaly_count_max");
        if (!(radius_min > 0.0 && radius_max >= radius_min)) throw ConfigError("phantom: bad blob radius range");
        if (!(magnitude_min > 0.0 && magnitude_max >= magnitude_min))
            throw ConfigError("phantom: anomaly magnitudes must be positive with min <= max");
        if (global_sd < 0.0 || gradient_sd < 0.0 || texture_sd < 0.0)
            throw ConfigError("phantom: variability amplitudes must be >= 0");
    }
};

enum class Group { healthy, anomalous };

struct Subject {
    std::string id;
    Group group = Group::healthy;
    Volume image;
    Volume latent;
    Condition edge;
    Mask truth;
    /// Per-subject blob amplitude; 0 for healthy subjects.
    double magnitude = 0.0;
    /// Injected intensity integral divided by the shell voxel count.
    double burden = 0.0;
};

namespace detail {

struct ShellGeometry {
    std::array<double, 3> centre{};
    std::array<double, 3> outer{};
    std::array<double, 3> inner{};
};

inline ShellGeometry shell_geometry(const PhantomSpec& spec) {
    ShellGeometry g;
    const std::array<double, 3> n{static_cast<double>(spec.dims.nx), static_cast<double>(spec.dims.ny),
                                  static_cast<double>(spec.dims.nz)};
    for (int a = 0; a < 3; ++a) {
        g.centre[a] = 0.5 * (n[a] - 1.0);
        g.outer[a] = spec.radii[a] * 0.5 * n[a];
        g.inner[a] = g.outer[a] - spec.shell_thickness;
    }
    return g;
}

inline double ellipsoid_rho(const std::array<double, 3>& p, const std::array<double, 3>& c,
                            const std::array<double, 3>& r) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double u = (p[a] - c[a]) / r[a];
        s += u * u;
    }
    return std::sqrt(s);
}

template <class F>
void for_each_voxel(const Dims& d, F f) {
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x)
                f(x, y, z, std::array<double, 3>{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)});
}

} // namespace detail

/// Cortical shell (brain region) in image space.
inline Mask shell_mask(const PhantomSpec& spec) {
    const auto g = detail::shell_geometry(spec);
    if (g.inner[0] <= 0.0 || g.inner[1] <= 0.0 || g.inner[2] <= 0.0)
        throw ConfigError("phantom: shell thickness exceeds ellipsoid radii");
    Volume v(spec.dims);
    detail::for_each_voxel(spec.dims, [&](std::size_t x, std::size_t y, std::size_t z, const auto& p) {
        const bool in_outer = detail::ellipsoid_rho(p, g.centre, g.outer) <= 1.0;
        const bool in_inner = detail::ellipsoid_rho(p, g.centre, g.inner) <= 1.0;
        v.at(x, y, z) = in_outer && !in_inner ? 1.0f : 0.0f;
    });
    Mask m(std::move(v));
    if (m.count() == 0) throw ConfigError("phantom: geometry yields an empty shell");
    return m;
}

struct Region {
    std::string name;
    Mask mask;
};

/// Four quadrant "lobes" of the shell split on the x and y centre planes.
inline std::vector<Region> lobe_regions(const PhantomSpec& spec, const Mask& shell) {
    static const std::array<const char*, 4> names{"frontal", "parietal", "occipital", "temporal"};
    const auto g = detail::shell_geometry(spec);
    std::vector<Region> out;
    for (int q = 0; q < 4; ++q) {
        Volume v(spec.dims);
        detail::for_each_voxel(spec.dims, [&](std::size_t x, std::size_t y, std::size_t z, const auto& p) {
            const int qx = p[0] >= g.centre[0] ? 1 : 0;
            const int qy = p[1] >= g.centre[1] ? 1 : 0;
            const std::size_t i = spec.dims.index(x, y, z);
            v[i] = (qx + 2 * qy == q && shell[i]) ? 1.0f : 0.0f;
        });
        out.push_back({names[static_cast<std::size_t>(q)], Mask(std::move(v))});
    }
    return out;
}

inline constexpr int kPlacementAttempts = 64;

/// Seeded healthy base image plus, for anomalous subjects, blobs restricted to the shell.
/// `inject = false` returns the anomalous subject's healthy base (same stream, no blobs).
inline Subject make_subject(const PhantomSpec& spec, const Mask& shell, Group group, std::size_t index,
                            bool inject = true) {
    const auto g = detail::shell_geometry(spec);
    const std::uint64_t stream = (group == Group::healthy ? 0ull : 1ull << 32) + index;
    Rng rng(mix_seed(spec.seed, stream));

    const double scale = 1.0 + spec.global_sd * rng.normal();
    std::array<double, 3> grad{};
    for (auto& x : grad) x = spec.gradient_sd * rng.normal();

    Subject s;
    s.group = group;
    std::ostringstream id;
    id << (group == Group::healthy ? "H" : "A") << std::setw(4) << std::setfill('0') << index;
    s.id = id.str();
    s.image = Volume(spec.dims);
    detail::for_each_voxel(spec.dims, [&](std::size_t x, std::size_t y, std::size_t z, const auto& p) {
        const std::size_t i = spec.dims.index(x, y, z);
        double value = 0.0;
        if (detail::ellipsoid_rho(p, g.centre, g.outer) <= 1.0) {
            double tilt = 0.0;
            for (int a = 0; a < 3; ++a) tilt += grad[a] * (p[a] - g.centre[a]) / g.outer[a];
            const double level = shell[i] ? spec.cortex_level : spec.interior_level;
            value = level * scale * (1.0 + tilt);
        }
        s.image[i] = static_cast<float>(value);
    });
    // Texture is drawn after the geometry pass so the stream order is fixed.
    for (std::size_t i = 0; i < s.image.size(); ++i)
        if (s.image[i] != 0.0f) s.image[i] = static_cast<float>(s.image[i] + spec.texture_sd * rng.normal());

    Volume truth(spec.dims);
    if (group == Group::anomalous && inject) {
        std::vector<std::size_t> shell_voxels;
        for (std::size_t i = 0; i < shell.volume().size(); ++i)
            if (shell[i]) shell_voxels.push_back(i);
        s.magnitude = rng.uniform(spec.magnitude_min, spec.magnitude_max);
        const int count = rng.uniform_int(spec.anomaly_count_min, spec.anomaly_count_max);
        std::vector<double> added(spec.dims.voxels(), 0.0);
        std::vector<std::pair<std::array<double, 3>, double>> placed;
        for (int b = 0; b < count; ++b) {
            const double radius = rng.uniform(spec.radius_min, spec.radius_max);
            // Rejection sampling keeps blobs disjoint when possible; the last candidate is kept otherwise.
            std::array<double, 3> centre{};
            for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
                const std::size_t c = shell_voxels[static_cast<std::size_t>(rng.uniform() * shell_voxels.size())];
                centre = {static_cast<double>(c % spec.dims.nx), static_cast<double>((c / spec.dims.nx) % spec.dims.ny),
                          static_cast<double>(c / (spec.dims.nx * spec.dims.ny))};
                bool clear = true;
                for (const auto& [other, r] : placed) {
                    double d2 = 0.0;
                    for (int a = 0; a < 3; ++a) d2 += (centre[a] - other[a]) * (centre[a] - other[a]);
                    if (std::sqrt(d2) < radius + r + 2.0) clear = false;
                }
                if (clear) break;
            }
            placed.emplace_back(centre, radius);
            detail::for_each_voxel(spec.dims, [&](std::size_t x, std::size_t y, std::size_t z, const auto& p) {
                const std::size_t i = spec.dims.index(x, y, z);
                if (!shell[i]) return;
                double d2 = 0.0;
                for (int a = 0; a < 3; ++a) d2 += (p[a] - centre[a]) * (p[a] - centre[a]);
                const double d = std::sqrt(d2);
                // Flat core with a one-voxel cosine rim on each side of the nominal radius.
                double profile = 0.0;
                if (d <= radius - 1.0) profile = 1.0;
                else if (d < radius + 1.0) profile = 0.5 * (1.0 + std::cos(std::numbers::pi * (d - radius + 1.0) / 2.0));
                added[i] = std::max(added[i], s.magnitude * profile);
                if (d <= radius) truth[i] = 1.0f;
            });
        }
        double total = 0.0;
        for (std::size_t i = 0; i < added.size(); ++i) {
            s.image[i] = static_cast<float>(s.image[i] + added[i]);
            total += added[i];
        }
        s.burden = total / static_cast<double>(shell.count());
    }
    s.truth = Mask(std::move(truth));
    s.latent = encode(s.image, spec.codec);
    s.edge = Condition{edge_map(s.latent)};
    return s;
}

/// Healthy subjects H0000.. followed by anomalous A0000..; reproducible from spec.seed.
inline std::vector<Subject> gen_phantoms(const PhantomSpec& spec, std::size_t n_healthy, std::size_t n_anomalous) {
    spec.validate();
    if (n_healthy + n_anomalous == 0) throw ConfigError("gen_phantoms: need at least one subject");
    const Mask shell = shell_mask(spec);
    std::vector<Subject> out;
    out.reserve(n_healthy + n_anomalous);
    for (std::size_t i = 0; i < n_healthy; ++i) out.push_back(make_subject(spec, shell, Group::healthy, i));
    for (std::size_t i = 0; i < n_anomalous; ++i) out.push_back(make_subject(spec, shell, Group::anomalous, i));
    return out;
}

// ---------------------------------------------------------------------------
// Parallel helper

/// Calls f(i) for i in [0, n) on up to `jobs` threads. f must only touch slot i.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& f) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(jobs);
    {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j)
            pool.emplace_back([&, j] {
                try {
                    for (std::size_t i = j; i < n; i += jobs) f(i);
                } catch (...) {
                    errors[j] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Anomaly maps, classifier, scores

/// decode(input - recon): positive where the input exceeds its pseudo-healthy version.
inline Volume anomaly_map(const Volume& input_latent, const Volume& recon_latent, const LatentCodecSpec& codec) {
    return decode(sub(input_latent, recon_latent), codec);
}

inline constexpr std::size_t kFeatureCount = 4;
using Features = std::array<double, kFeatureCount>;

/// Pooled map statistics inside the brain mask: mean, max, 95th percentile, positive fraction.
inline Features map_features(const Volume& map, const Mask& brain) {
    auto values = masked_values(map, brain);
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    std::size_t positive = 0;
    for (double v : values) {
        sum += v;
        if (v > 0.0) ++positive;
    }
    const double n = static_cast<double>(values.size());
    return {sum / n, values.back(), sorted_percentile(values, 95.0), static_cast<double>(positive) / n};
}

struct ClassifierOptions {
    int iterations = 2000;
    double learning_rate = 0.5;
    double l2 = 1e-3;
    std::uint64_t seed = 0;
};

/// Logistic regression on standardised features.
struct ClassifierModel {
    Features mean{};
    Features scale{};
    Features weights{};
    double bias = 0.0;

    [[nodiscard]] double predict(const Features& f) const {
        double z = bias;
        for (std::size_t j = 0; j < kFeatureCount; ++j) z += weights[j] * (f[j] - mean[j]) / scale[j];
        return 1.0 / (1.0 + std::exp(-z));
    }
};

/// Full-batch gradient descent on mean log-loss + l2/2 |w|^2, fixed step count, seeded init.
inline ClassifierModel fit_classifier(const std::vector<Features>& x, const std::vector<int>& labels,
                                      const ClassifierOptions& opt = {}) {
    if (x.size() != labels.size() || x.empty()) throw DimensionError("fit_classifier: need one label per sample");
    const bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
    const bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
    if (!has_pos || !has_neg) throw NumericError("fit_classifier: training set must contain both labels");

    const double n = static_cast<double>(x.size());
    ClassifierModel m;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        double mu = 0.0;
        for (const auto& f : x) mu += f[j];
        mu /= n;
        double var = 0.0;
        for (const auto& f : x) var += (f[j] - mu) * (f[j] - mu);
        const double sd = std::sqrt(var / n);
        m.mean[j] = mu;
        m.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    std::vector<Features> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < kFeatureCount; ++j) z[i][j] = (x[i][j] - m.mean[j]) / m.scale[j];

    Rng rng(opt.seed);
    for (auto& w : m.weights) w = 0.01 * rng.normal();
    for (int it = 0; it < opt.iterations; ++it) {
        Features gw{};
        double gb = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            double s = m.bias;
            for (std::size_t j = 0; j < kFeatureCount; ++j) s += m.weights[j] * z[i][j];
            const double r = 1.0 / (1.0 + std::exp(-s)) - labels[i];
            for (std::size_t j = 0; j < kFeatureCount; ++j) gw[j] += r * z[i][j];
            gb += r;
        }
        for (std::size_t j = 0; j < kFeatureCount; ++j)
            m.weights[j] -= opt.learning_rate * (gw[j] / n + opt.l2 * m.weights[j]);
        m.bias -= opt.learning_rate * gb / n;
    }
    return m;
}

/// sqrt(max(m_suvr, 0) * p_cls)
inline double anomaly_score(double m_suvr, double p_cls) {
    if (!(p_cls >= 0.0 && p_cls <= 1.0)) throw DomainError("anomaly_score: p_cls outside [0, 1]");
    return std::sqrt(std::max(m_suvr, 0.0) * p_cls);
}

enum class SuvrReading { input, anomaly_map };

struct AnomalyReport {
    Volume anomaly_map;
    double m_suvr = 0.0;
    double p_cls = 0.0;
    double score = 0.0;
};

inline double m_suvr_of(const Subject& s, const Volume& map, const Mask& brain, SuvrReading reading) {
    return reading == SuvrReading::input ? masked_mean(s.image, brain) : masked_mean(map, brain);
}

// ---------------------------------------------------------------------------
// Cohort orchestration

struct Cohort {
    PhantomSpec spec;
    std::vector<Subject> subjects;
    Mask brain;
    Mask shape;
    std::vector<Region> regions;
    /// 1 for subjects in the training split, 0 for held-out subjects.
    std::vector<unsigned char> train;
};

/// Seeded per-group shuffle; the first round(fraction * n) of each group train.
inline std::vector<unsigned char> split_train(const std::vector<Subject>& subjects, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("train_fraction must lie in [0, 1]");
    std::vector<unsigned char> train(subjects.size(), 0);
    for (Group g : {Group::healthy, Group::anomalous}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < subjects.size(); ++i)
            if (subjects[i].group == g) idx.push_back(i);
        Rng rng(mix_seed(seed, g == Group::healthy ? 0x5eed0 : 0x5eed1));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        const auto n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
        for (std::size_t j = 0; j < n_train; ++j) train[idx[j]] = 1;
    }
    return train;
}

inline Cohort make_cohort(const PhantomSpec& spec, std::size_t n_healthy, std::size_t n_anomalous,
                          double train_fraction) {
    Cohort c;
    c.spec = spec;
    c.subjects = gen_phantoms(spec, n_healthy, n_anomalous);
    c.brain = shell_mask(spec);
    c.shape = encode_mask(c.brain, spec.codec);
    c.regions = lobe_regions(spec, c.brain);
    c.train = split_train(c.subjects, train_fraction, spec.seed);
    return c;
}

/// Latents of healthy subjects in the training split.
inline std::vector<Volume> healthy_training_latents(const Cohort& c) {
    std::vector<Volume> out;
    for (std::size_t i = 0; i < c.subjects.size(); ++i)
        if (c.train[i] && c.subjects[i].group == Group::healthy) out.push_back(c.subjects[i].latent);
    if (out.empty()) throw ConfigError("cohort has no healthy training subjects");
    return out;
}

/// Pooled per-voxel variance of the volumes around `centre` inside `region` (n - 1 normalised).
inline double pooled_variance(const std::vector<Volume>& volumes, const Volume& centre, const Mask& region) {
    if (volumes.size() < 2) throw DomainError("pooled_variance: need at least two volumes");
    double acc = 0.0;
    for (const auto& v : volumes) {
        detail::require_same_shape(v, centre, "pooled_variance");
        for (std::size_t i = 0; i < v.voxels(); ++i)
            if (region[i]) {
                const double d = static_cast<double>(v[i]) - centre[i];
                acc += d * d;
            }
    }
    const double n = static_cast<double>(region.count()) * static_cast<double>(volumes.size() - 1);
    return acc / n;
}

enum class OracleKind { template_gaussian, cohort_mixture };

/// Healthy-distribution oracle: one Gaussian at the template, or one component per healthy latent.
inline MixtureModel healthy_oracle(const std::vector<Volume>& healthy, const Volume& tmpl, OracleKind kind, double tau2) {
    if (kind == OracleKind::template_gaussian) return MixtureModel::equal_weights({tmpl}, tau2);
    return MixtureModel::equal_weights(healthy, tau2);
}

/// Reconstructs every subject; subject i uses forward seed mix_seed(cfg.seed, i).
inline std::vector<Volume> reconstruct_all(const std::vector<Subject>& subjects, const SamplerConfig& cfg,
                                           const Denoiser& den, std::size_t jobs) {
    std::vector<Volume> out(subjects.size());
    parallel_for(subjects.size(), jobs, [&](std::size_t i) {
        SamplerConfig local = cfg;
        local.seed = mix_seed(cfg.seed, i);
        out[i] = reconstruct(subjects[i].latent, local, den, subjects[i].edge);
    });
    return out;
}

struct ScoredCohort {
    ClassifierModel classifier;
    std::vector<AnomalyReport> reports;
};

/// Fits the classifier on the training split and scores every subject.
inline ScoredCohort score_cohort(const std::vector<Subject>& subjects, std::vector<Volume> maps, const Mask& brain,
                                 const std::vector<unsigned char>& train, const ClassifierOptions& opt,
                                 SuvrReading reading) {
    if (maps.size() != subjects.size() || train.size() != subjects.size())
        throw DimensionError("score_cohort: subjects, maps and split differ in length");
    std::vector<Features> features(subjects.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) features[i] = map_features(maps[i], brain);
    std::vector<Features> fx;
    std::vector<int> fy;
    for (std::size_t i = 0; i < subjects.size(); ++i)
        if (train[i]) {
            fx.push_back(features[i]);
            fy.push_back(subjects[i].group == Group::anomalous ? 1 : 0);
        }
    ScoredCohort out;
    out.classifier = fit_classifier(fx, fy, opt);
    out.reports.resize(subjects.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        auto& r = out.reports[i];
        r.m_suvr = m_suvr_of(subjects[i], maps[i], brain, reading);
        r.p_cls = out.classifier.predict(features[i]);
        r.score = anomaly_score(r.m_suvr, r.p_cls);
        r.anomaly_map = std::move(maps[i]);
    }
    return out;
}

/// Mean over anomalous subjects of the in-brain voxelwise AUC of the map against the blob mask.
inline double localization_auc(const std::vector<Subject>& subjects, const std::vector<Volume>& maps, const Mask& brain) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        if (subjects[i].group != Group::anomalous) continue;
        const auto scores = masked_values(maps[i], brain);
        const auto truth = masked_values(subjects[i].truth.volume(), brain);
        std::vector<unsigned char> labels(truth.begin(), truth.end());
        total += roc_auc(scores, labels);
        ++n;
    }
    if (n == 0) throw DomainError("localization_auc: no anomalous subjects");
    return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Cohort evaluation

struct RegionCorrelation {
    std::string region;
    double pearson_r = 0.0;
    std::size_t n = 0;
};

struct GroupComparison {
    std::size_t group_a_n = 0;
    std::size_t group_b_n = 0;
    double neglog10_p = 0.0;
};

struct EvaluationTable {
    std::vector<RegionCorrelation> regions;
    GroupComparison groups;
    std::vector<std::string> warnings;
};

/// Per-region Pearson r of subject scores against regional input means, and a Welch
/// comparison of subject magnitudes between predicted-positive (p_cls >= 0.5) and -negative.
inline EvaluationTable evaluate_cohort(const std::vector<Subject>& subjects, const std::vector<AnomalyReport>& reports,
                                       const std::vector<Region>& regions) {
    if (subjects.size() != reports.size()) throw DimensionError("evaluate_cohort: subjects and reports differ in length");
    EvaluationTable table;
    std::vector<double> scores;
    for (const auto& r : reports) scores.push_back(r.score);
    for (const auto& region : regions) {
        std::vector<double> means;
        try {
            for (const auto& s : subjects) means.push_back(masked_mean(s.image, region.mask));
            table.regions.push_back({region.name, pearson(scores, means), subjects.size()});
        } catch (const NumericError& e) {
            table.warnings.push_back("region " + region.name + " skipped: " + e.what());
        }
    }
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < subjects.size(); ++i)
        (reports[i].p_cls >= 0.5 ? pos : neg).push_back(subjects[i].magnitude);
    table.groups.group_a_n = pos.size();
    table.groups.group_b_n = neg.size();
    try {
        table.groups.neglog10_p = welch_neglog_p(pos, neg);
    } catch (const NumericError& e) {
        table.warnings.push_back(std::string("group comparison skipped: ") + e.what());
    }
    return table;
}

inline std::string format_number(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

inline std::string regions_csv(const EvaluationTable& t) {
    std::string out = "region,pearson_r,n\n";
    for (const auto& r : t.regions) out += r.region + "," + format_number(r.pearson_r) + "," + std::to_string(r.n) + "\n";
    return out;
}

inline std::string groups_csv(const EvaluationTable& t) {
    return "group_a_n,group_b_n,neglog10_p\n" + std::to_string(t.groups.group_a_n) + "," +
           std::to_string(t.groups.group_b_n) + "," + format_number(t.groups.neglog10_p) + "\n";
}

} // namespace pfode
