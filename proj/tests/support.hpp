#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "modalid/synth.hpp"
#include "modalid/time_series.hpp"

namespace testing {

inline constexpr double kFs = 20000.0;

/// Bundled parameters calibrated to 99.59 Hz / 0.2917 and 616.45 Hz / 0.0656.
inline modalid::TrackConfig cp_a7() {
    modalid::TrackConfig c;
    c.m_rail = 30.0;
    c.m_sleeper = 150.0;
    c.k_pad = 373720215.8457249;
    c.c_pad = 10780.75988818808;
    c.k_ballast = 70725714.75510459;
    c.c_ballast = 66297.81156062348;
    return c;
}

inline modalid::TimeSeries sine(double f, std::size_t n, double amp = 1.0, double fs = kFs, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
    return modalid::TimeSeries(std::move(x), fs);
}

inline modalid::TimeSeries white(std::size_t n, std::uint64_t seed, double sigma = 1.0, double fs = kFs) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, sigma);
    std::vector<double> x(n);
    for (auto& v : x) v = d(rng);
    return modalid::TimeSeries(std::move(x), fs);
}

inline double rms_diff(const std::vector<double>& a, const std::vector<double>& b, std::size_t from = 0,
                       std::size_t to = static_cast<std::size_t>(-1)) {
    to = std::min({to, a.size(), b.size()});
    double acc = 0.0;
    for (std::size_t i = from; i < to; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc / static_cast<double>(to - from));
}

inline double rms_of(const std::vector<double>& a, std::size_t from = 0, std::size_t to = static_cast<std::size_t>(-1)) {
    to = std::min(to, a.size());
    double acc = 0.0;
    for (std::size_t i = from; i < to; ++i) acc += a[i] * a[i];
    return std::sqrt(acc / static_cast<double>(to - from));
}

/// Fresh scratch directory below the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("modalid_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace testing
