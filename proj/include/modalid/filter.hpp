#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "modalid/time_series.hpp"

namespace modalid {

enum class FilterKind { lowpass, highpass, bandpass };

/// How the record is extended past its ends before forward-backward filtering.
enum class EdgePadding {
    odd_reflect,  // point-reflection about the end samples
    zero,         // record at rest outside the window (impact segments starting at the peak)
};

/// Fixed design: 4th-order Butterworth per corner, run forward and backward (zero phase).
/// A bandpass is the cascade of a highpass at `cutoff_hz` and a lowpass at `upper_hz`.
struct FilterSpec {
    FilterKind kind = FilterKind::lowpass;
    double cutoff_hz = 0.0;
    double upper_hz = 0.0;  // bandpass only
    EdgePadding padding = EdgePadding::odd_reflect;

    static FilterSpec lowpass(double hz, EdgePadding pad = EdgePadding::odd_reflect);
    static FilterSpec highpass(double hz, EdgePadding pad = EdgePadding::odd_reflect);
    static FilterSpec bandpass(double low_hz, double high_hz,
                               EdgePadding pad = EdgePadding::odd_reflect);
};

inline constexpr int kButterworthOrder = 4;

/// Transposed direct-form II second-order section, a0 normalised to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    std::complex<double> response(std::complex<double> z) const;
};

/// Cascade of biquads for one FilterSpec at one sample rate.
class SosFilter {
public:
    SosFilter(const FilterSpec& spec, double sample_rate);

    const std::vector<Biquad>& sections() const noexcept { return sections_; }
    double sample_rate() const noexcept { return sample_rate_; }

    /// Single-pass complex gain at f Hz.
    std::complex<double> response(double f_hz) const;

    /// Number of odd-reflected samples added at each end (3 x equivalent tap count).
    std::size_t pad_length() const noexcept { return 3 * (2 * sections_.size() + 1); }

    /// Samples after which the slowest pole has decayed below double precision.
    std::size_t settle_length() const;

    /// Causal single pass; output length equals input length.
    std::vector<double> filter(std::span<const double> x, bool steady_state_start) const;

    /// Zero-phase forward-backward pass.
    std::vector<double> filtfilt(std::span<const double> x, EdgePadding padding) const;

private:
    std::vector<Biquad> sections_;
    double sample_rate_;
};

/// Zero-phase filtering; same length and sample rate as the input.
/// Throws InvalidFilterError for corners outside (0, Nyquist) and TooShortError when the
/// series is not longer than SosFilter::pad_length().
TimeSeries apply_filter(const TimeSeries& ts, const FilterSpec& spec);

/// Lowpass and highpass branches at the same corner.
std::pair<TimeSeries, TimeSeries> band_split(const TimeSeries& ts, double split_hz = 200.0,
                                             EdgePadding padding = EdgePadding::odd_reflect);

}  // namespace modalid
