#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "pfode/rng.hpp"
#include "pfode/volume.hpp"

namespace testing_support {

inline pfode::Volume random_volume(pfode::Dims d, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    pfode::Rng rng(seed);
    pfode::Volume v(d);
    for (auto& x : v.data()) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

inline double max_abs_diff(const pfode::Volume& a, const pfode::Volume& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

inline double max_abs(const pfode::Volume& a) {
    double m = 0.0;
    for (float x : a.data()) m = std::max(m, std::abs(static_cast<double>(x)));
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("pfode_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing_support
