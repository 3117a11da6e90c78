// Shared fixtures for the unit tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "flowstrain/volume.hpp"

namespace testutil {

using namespace flowstrain;

inline Volume3 random_volume(Shape3 s, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Volume3 v(s);
    for (double &x : v.data()) x = u(rng);
    return v;
}

inline FlowField random_flow(Shape3 s, std::uint64_t seed, double amp) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    FlowField f(s);
    for (double &x : f.data()) x = u(rng);
    return f;
}

// Sum of a few low-frequency sinusoids; smooth at the voxel scale.
inline Volume3 smooth_volume(Shape3 s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double a[3][4];
    for (auto &row : a)
        for (double &x : row) x = u(rng);
    Volume3 v(s);
    for (std::size_t z = 0; z < s.d; ++z)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                double acc = 0.0;
                for (auto &t : a) {
                    acc += t[0] * std::sin(0.3 * t[1] * static_cast<double>(x) + 0.25 * t[2] * static_cast<double>(y) +
                                           0.2 * t[3] * static_cast<double>(z) + 6.0 * t[0]);
                }
                v.at(z, y, x) = acc;
            }
    return v;
}

inline FlowField smooth_flow(Shape3 s, std::uint64_t seed, double amp) {
    FlowField f(s);
    for (std::size_t c = 0; c < 3; ++c) {
        const Volume3 v = smooth_volume(s, seed * 7 + c);
        for (std::size_t i = 0; i < s.voxels(); ++i) f.at(i, c) = amp * v[i] / 3.0;
    }
    return f;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string &name) {
    const auto p = std::filesystem::temp_directory_path() / ("flowstrain_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testutil
