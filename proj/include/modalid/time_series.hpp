#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modalid {

/// Uniformly sampled real channel. Sample i sits at t0 + i / sample_rate.
struct TimeSeries {
    std::vector<double> samples;
    double sample_rate = 0.0;  // Hz
    std::string label;
    double t0 = 0.0;  // seconds

    TimeSeries() = default;
    TimeSeries(std::vector<double> s, double rate, std::string lbl = {}, double start = 0.0);

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    double sample_time() const noexcept { return 1.0 / sample_rate; }
    double nyquist() const noexcept { return 0.5 * sample_rate; }
    double time_at(std::size_t i) const noexcept {
        return t0 + static_cast<double>(i) / sample_rate;
    }
    double end_time() const noexcept { return time_at(samples.size()); }

    std::span<const double> view() const noexcept { return samples; }

    /// Samples [begin, end) with t0 shifted accordingly.
    TimeSeries slice(std::size_t begin, std::size_t end) const;

    /// Throws InvalidParameterError unless sample_rate > 0 and samples are non-empty.
    void validate() const;
};

/// One excitation window: a hammer impact (force present) or a wheel event.
struct ImpactSegment {
    std::optional<TimeSeries> force_window;
    TimeSeries accel_window;
    std::size_t event_index = 0;
    double peak_time = 0.0;
    // Window ended early at the next event (or the end of the record).
    bool truncated = false;
    // Another excitation closer than the separation limit was folded into this one.
    bool merged = false;
};

double rms(std::span<const double> x);
double mean(std::span<const double> x);

}  // namespace modalid
