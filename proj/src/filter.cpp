#include "modalid/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "modalid/error.hpp"

namespace modalid {
namespace {

enum class Section { lowpass, highpass };

// Bilinear transform of the Butterworth prototype, corner prewarped to the digital fc.
std::vector<Biquad> butterworth(Section type, double fc, double fs) {
    const double k = 2.0 * fs;
    const double omega = k * std::tan(std::numbers::pi * fc / fs);
    std::vector<Biquad> out;
    for (int p = 0; p < kButterworthOrder / 2; ++p) {
        const double theta =
            std::numbers::pi * (2.0 * (p + 1) + kButterworthOrder - 1) / (2.0 * kButterworthOrder);
        const double zeta = -std::cos(theta);
        const double d0 = k * k + 2.0 * zeta * omega * k + omega * omega;
        const double d1 = 2.0 * (omega * omega - k * k);
        const double d2 = k * k - 2.0 * zeta * omega * k + omega * omega;
        Biquad q;
        if (type == Section::lowpass) {
            const double g = omega * omega / d0;
            q.b0 = g;
            q.b1 = 2.0 * g;
            q.b2 = g;
        } else {
            const double g = k * k / d0;
            q.b0 = g;
            q.b1 = -2.0 * g;
            q.b2 = g;
        }
        q.a1 = d1 / d0;
        q.a2 = d2 / d0;
        out.push_back(q);
    }
    return out;
}

void check_corner(double hz, double fs) {
    if (!(hz > 0.0) || !(hz < 0.5 * fs)) {
        throw InvalidFilterError("filter corner " + std::to_string(hz) +
                                 " Hz must lie strictly inside (0, " + std::to_string(0.5 * fs) +
                                 ") Hz");
    }
}

// Steady-state TDF-II states for a unit step at the cascade input.
std::vector<std::pair<double, double>> step_states(const std::vector<Biquad>& sections) {
    std::vector<std::pair<double, double>> zi;
    double level = 1.0;
    for (const auto& s : sections) {
        const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        const double y = gain * level;
        const double z2 = s.b2 * level - s.a2 * y;
        const double z1 = s.b1 * level - s.a1 * y + z2;
        zi.emplace_back(z1, z2);
        level = y;
    }
    return zi;
}

void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& x,
                 const std::vector<std::pair<double, double>>* zi, double zi_scale) {
    for (std::size_t k = 0; k < sections.size(); ++k) {
        const auto& s = sections[k];
        double z1 = zi ? (*zi)[k].first * zi_scale : 0.0;
        double z2 = zi ? (*zi)[k].second * zi_scale : 0.0;
        for (double& v : x) {
            const double in = v;
            const double y = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * y + z2;
            z2 = s.b2 * in - s.a2 * y;
            v = y;
        }
    }
}

}  // namespace

FilterSpec FilterSpec::lowpass(double hz, EdgePadding pad) {
    return {FilterKind::lowpass, hz, 0.0, pad};
}

FilterSpec FilterSpec::highpass(double hz, EdgePadding pad) {
    return {FilterKind::highpass, hz, 0.0, pad};
}

FilterSpec FilterSpec::bandpass(double low_hz, double high_hz, EdgePadding pad) {
    return {FilterKind::bandpass, low_hz, high_hz, pad};
}

std::complex<double> Biquad::response(std::complex<double> z) const {
    const auto zi = 1.0 / z;
    return (b0 + b1 * zi + b2 * zi * zi) / (1.0 + a1 * zi + a2 * zi * zi);
}

SosFilter::SosFilter(const FilterSpec& spec, double sample_rate) : sample_rate_(sample_rate) {
    if (!(sample_rate > 0.0)) throw InvalidFilterError("sample rate must be positive");
    check_corner(spec.cutoff_hz, sample_rate);
    switch (spec.kind) {
        case FilterKind::lowpass:
            sections_ = butterworth(Section::lowpass, spec.cutoff_hz, sample_rate);
            break;
        case FilterKind::highpass:
            sections_ = butterworth(Section::highpass, spec.cutoff_hz, sample_rate);
            break;
        case FilterKind::bandpass: {
            check_corner(spec.upper_hz, sample_rate);
            if (!(spec.cutoff_hz < spec.upper_hz)) {
                throw InvalidFilterError("bandpass needs low corner below high corner");
            }
            sections_ = butterworth(Section::highpass, spec.cutoff_hz, sample_rate);
            auto lp = butterworth(Section::lowpass, spec.upper_hz, sample_rate);
            sections_.insert(sections_.end(), lp.begin(), lp.end());
            break;
        }
    }
}

std::complex<double> SosFilter::response(double f_hz) const {
    const auto z = std::polar(1.0, 2.0 * std::numbers::pi * f_hz / sample_rate_);
    std::complex<double> h = 1.0;
    for (const auto& s : sections_) h *= s.response(z);
    return h;
}

std::size_t SosFilter::settle_length() const {
    double radius = 0.0;
    for (const auto& s : sections_) {
        const double disc = s.a1 * s.a1 - 4.0 * s.a2;
        if (disc < 0.0) {
            radius = std::max(radius, std::sqrt(s.a2));
        } else {
            const double r = std::sqrt(disc);
            radius = std::max({radius, std::abs(-s.a1 + r) / 2.0, std::abs(-s.a1 - r) / 2.0});
        }
    }
    if (radius <= 0.0) return 1;
    // Margin of a few decades on top of the pure pole decay covers the resonant gain.
    return static_cast<std::size_t>(std::ceil(std::log(1e-20) / std::log(radius)));
}

std::vector<double> SosFilter::filter(std::span<const double> x, bool steady_state_start) const {
    std::vector<double> y(x.begin(), x.end());
    if (y.empty()) return y;
    if (steady_state_start) {
        const auto zi = step_states(sections_);
        run_cascade(sections_, y, &zi, x.front());
    } else {
        run_cascade(sections_, y, nullptr, 0.0);
    }
    return y;
}

std::vector<double> SosFilter::filtfilt(std::span<const double> x, EdgePadding padding) const {
    const std::size_t n = x.size();
    const std::size_t pad = pad_length();
    if (n <= pad) {
        throw TooShortError("series of " + std::to_string(n) +
                            " samples too short for zero-phase filtering (needs > " +
                            std::to_string(pad) + ")");
    }

    if (padding == EdgePadding::zero) {
        const std::size_t tail = settle_length();
        std::vector<double> ext(n + tail, 0.0);
        std::copy(x.begin(), x.end(), ext.begin());
        run_cascade(sections_, ext, nullptr, 0.0);
        std::reverse(ext.begin(), ext.end());
        run_cascade(sections_, ext, nullptr, 0.0);
        std::reverse(ext.begin(), ext.end());
        ext.resize(n);
        return ext;
    }

    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    const auto zi = step_states(sections_);
    run_cascade(sections_, ext, &zi, ext.front());
    std::reverse(ext.begin(), ext.end());
    run_cascade(sections_, ext, &zi, ext.front());
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

TimeSeries apply_filter(const TimeSeries& ts, const FilterSpec& spec) {
    ts.validate();
    const SosFilter f(spec, ts.sample_rate);
    return TimeSeries(f.filtfilt(ts.samples, spec.padding), ts.sample_rate, ts.label, ts.t0);
}

std::pair<TimeSeries, TimeSeries> band_split(const TimeSeries& ts, double split_hz,
                                             EdgePadding padding) {
    return {apply_filter(ts, FilterSpec::lowpass(split_hz, padding)),
            apply_filter(ts, FilterSpec::highpass(split_hz, padding))};
}

}  // namespace modalid
