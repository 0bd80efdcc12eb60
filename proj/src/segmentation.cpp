#include "modalid/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "modalid/error.hpp"

namespace modalid {
namespace {

std::size_t to_samples(double seconds, double fs) {
    return static_cast<std::size_t>(std::llround(seconds * fs));
}

}  // namespace

std::vector<ImpactSegment> segment_impacts(const TimeSeries& force, const TimeSeries& accel,
                                           const ImpactOptions& opts) {
    force.validate();
    accel.validate();
    if (force.size() != accel.size() || force.sample_rate != accel.sample_rate) {
        throw AlignmentError("force and acceleration channels are not aligned");
    }
    if (!(opts.threshold_frac > 0.0 && opts.threshold_frac < 1.0)) {
        throw InvalidParameterError("threshold_frac must lie in (0, 1)");
    }
    const auto& f = force.samples;
    const double peak_level = *std::max_element(f.begin(), f.end());
    if (!(peak_level > 0.0)) return {};
    const double threshold = opts.threshold_frac * peak_level;

    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < f.size();) {
        if (f[i] <= threshold) {
            ++i;
            continue;
        }
        std::size_t best = i;
        for (; i < f.size() && f[i] > threshold; ++i) {
            if (f[i] > f[best]) best = i;
        }
        peaks.push_back(best);
    }

    const std::size_t width = std::max<std::size_t>(1, to_samples(opts.window_s, force.sample_rate));
    std::vector<ImpactSegment> out;
    out.reserve(peaks.size());
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        const std::size_t begin = peaks[k];
        std::size_t end = begin + width;
        bool truncated = false;
        if (k + 1 < peaks.size() && peaks[k + 1] < end) {
            end = peaks[k + 1];
            truncated = true;
        }
        if (end > f.size()) {
            end = f.size();
            truncated = true;
        }
        ImpactSegment seg;
        seg.force_window = force.slice(begin, end);
        seg.accel_window = accel.slice(begin, end);
        seg.event_index = k;
        seg.peak_time = force.time_at(begin);
        seg.truncated = truncated;
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<double> rms_envelope(const TimeSeries& ts, double window_s) {
    ts.validate();
    const std::size_t n = ts.size();
    const std::size_t half = to_samples(window_s, ts.sample_rate) / 2;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + ts.samples[i] * ts.samples[i];
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n, i + half + 1);
        env[i] = std::sqrt(std::max(0.0, prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo));
    }
    return env;
}

std::vector<ImpactSegment> detect_wheel_events(const TimeSeries& accel,
                                               const WheelEventOptions& opts) {
    const auto env = rms_envelope(accel, opts.envelope_s);
    const std::size_t n = env.size();
    const double env_max = *std::max_element(env.begin(), env.end());
    if (!(env_max > 0.0)) return {};

    std::vector<double> sorted = env;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2),
                     sorted.end());
    const double median = sorted[n / 2];
    const double threshold = std::max(opts.threshold_frac * env_max, opts.floor_factor * median);

    const std::size_t sep = std::max<std::size_t>(1, to_samples(opts.min_separation_s, accel.sample_rate));
    auto is_local_max = [&](std::size_t i) {
        const bool left = i == 0 || env[i] > env[i - 1];
        const bool right = i + 1 == n || env[i] >= env[i + 1];
        return left && right;
    };

    std::vector<std::size_t> events;
    std::vector<bool> merged;
    for (std::size_t i = 0; i < n; ++i) {
        if (env[i] < threshold || !is_local_max(i)) continue;
        const std::size_t lo = i >= sep ? i - sep : 0;
        const std::size_t hi = std::min(n - 1, i + sep);
        bool dominant = true;
        for (std::size_t j = lo; j <= hi && dominant; ++j) {
            if (j < i ? env[j] >= env[i] : (j > i && env[j] > env[i])) dominant = false;
        }
        if (!dominant) continue;

        // A second excitation inside the separation limit shows up as another prominent
        // local maximum with a clear envelope dip in between.
        bool folded = false;
        for (std::size_t j = lo; j <= hi && !folded; ++j) {
            if (j == i || !is_local_max(j) || env[j] < 0.3 * env[i]) continue;
            const auto [a, b] = std::minmax(i, j);
            const double dip = *std::min_element(env.begin() + static_cast<std::ptrdiff_t>(a),
                                                 env.begin() + static_cast<std::ptrdiff_t>(b) + 1);
            if (dip <= 0.5 * env[j]) folded = true;
        }
        events.push_back(i);
        merged.push_back(folded);
    }

    const std::size_t width = std::max<std::size_t>(1, to_samples(opts.window_s, accel.sample_rate));
    const std::size_t guard = to_samples(opts.guard_s, accel.sample_rate);
    std::vector<ImpactSegment> out;
    out.reserve(events.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
        const std::size_t begin = events[k];
        std::size_t end = std::min(n, begin + width);
        if (k + 1 < events.size()) {
            const std::size_t next = events[k + 1];
            const std::size_t limit = next > begin + guard ? next - guard : begin + 1;
            end = std::min(end, std::max(limit, begin + 1));
        }
        ImpactSegment seg;
        seg.accel_window = accel.slice(begin, end);
        seg.event_index = k;
        seg.peak_time = accel.time_at(begin);
        seg.truncated = end < begin + width;
        seg.merged = merged[k];
        out.push_back(std::move(seg));
    }
    return out;
}

}  // namespace modalid
