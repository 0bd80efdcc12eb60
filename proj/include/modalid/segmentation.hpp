#pragma once

#include <vector>

#include "modalid/time_series.hpp"

namespace modalid {

struct ImpactOptions {
    double threshold_frac = 0.1;  // of max(force)
    double window_s = 0.15;
};

/// One segment per force peak above threshold_frac * max(force), starting at the peak and
/// lasting window_s. A window that would reach the next peak is cut there and flagged.
std::vector<ImpactSegment> segment_impacts(const TimeSeries& force, const TimeSeries& accel,
                                           const ImpactOptions& opts = {});

struct WheelEventOptions {
    double min_separation_s = 0.05;
    double threshold_frac = 0.1;  // of the envelope maximum
    double envelope_s = 0.002;    // centred short-time RMS window
    // Candidates must also clear this multiple of the median envelope (noise floor).
    double floor_factor = 4.0;
    double window_s = 0.15;
    // Segment stops this long before the next event; the zero-phase band-pass smears every
    // wheel impulse slightly backwards in time.
    double guard_s = 0.01;
};

/// Wheel excitations in an already band-passed passage record; force_window is absent.
std::vector<ImpactSegment> detect_wheel_events(const TimeSeries& accel,
                                               const WheelEventOptions& opts = {});

/// Centred moving RMS, window rounded to an odd sample count.
std::vector<double> rms_envelope(const TimeSeries& ts, double window_s);

}  // namespace modalid
