#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "pfode/error.hpp"

namespace pfode {

namespace detail {

inline double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Unbiased sample variance, two-pass.
inline double variance_of(std::span<const double> x, double mean) {
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s / static_cast<double>(x.size() - 1);
}

} // namespace detail

inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("pearson: sequence lengths differ");
    if (x.size() < 3) throw DomainError("pearson: need at least 3 pairs");
    const double mx = detail::mean_of(x);
    const double my = detail::mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: zero variance input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    double neglog10_p = 0.0;
};

/// Two-sided Welch unequal-variance t-test.
/// Degenerate only when the combined standard error vanishes; one constant group is allowed.
inline WelchResult welch_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DomainError("welch: each group needs at least 2 values");
    const double ma = detail::mean_of(a);
    const double mb = detail::mean_of(b);
    const double qa = detail::variance_of(a, ma) / static_cast<double>(a.size());
    const double qb = detail::variance_of(b, mb) / static_cast<double>(b.size());
    const double se2 = qa + qb;
    if (!(se2 > 0.0)) throw DomainError("welch: both groups have zero variance");
    WelchResult r;
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 / (qa * qa / static_cast<double>(a.size() - 1) + qb * qb / static_cast<double>(b.size() - 1));
    if (r.t == 0.0) return r;
    // p = I_{df/(df+t^2)}(df/2, 1/2)
    const long double x = static_cast<long double>(r.df) / (r.df + r.t * r.t);
    const long double p = boost::math::ibeta(static_cast<long double>(r.df) / 2.0L, 0.5L, x);
    r.p = static_cast<double>(p);
    r.neglog10_p = p > 0.0L ? -static_cast<double>(std::log10(p)) : -std::log10(std::numeric_limits<double>::denorm_min());
    return r;
}

inline double welch_neglog_p(std::span<const double> a, std::span<const double> b) {
    return welch_test(a, b).neglog10_p;
}

/// Area under the ROC curve via average ranks (Mann-Whitney U), ties counted half.
inline double roc_auc(std::span<const double> scores, std::span<const unsigned char> labels) {
    if (scores.size() != labels.size()) throw DimensionError("roc_auc: length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) {
                rank_sum += avg_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DomainError("roc_auc: need both classes");
    const double np = static_cast<double>(n_pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

} // namespace pfode
