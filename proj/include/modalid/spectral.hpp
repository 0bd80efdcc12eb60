#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "json.hpp"
#include "modalid/time_series.hpp"

namespace modalid {

enum class SpectrumKind { psd, cpsd, coherence, receptance };
enum class WindowKind { hann, rectangular };

/// Welch segmentation. Hann is the symmetric variant, so a time-reversed segment sees the
/// same taper.
struct WelchOptions {
    std::size_t seg_len = 4096;
    double overlap_frac = 0.5;
    WindowKind window = WindowKind::hann;
};

/// Frequency-indexed estimate. PSD and coherence values carry a zero imaginary part.
struct Spectrum {
    std::vector<double> freqs;
    std::vector<std::complex<double>> values;
    SpectrumKind kind = SpectrumKind::psd;
    std::size_t n_averages = 0;
    std::size_t segment_length = 0;
    // Per-bin validity; empty means every bin is valid.
    std::vector<bool> valid;

    std::size_t size() const noexcept { return freqs.size(); }
    double delta_f() const noexcept { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
    bool is_valid(std::size_t k) const noexcept { return valid.empty() || valid[k]; }
    std::vector<double> real() const;
    std::vector<double> magnitude() const;
};

struct ConfidenceBand {
    Spectrum center;
    Spectrum lower;
    Spectrum upper;
    double alpha = 0.05;
    double nu = 0.0;
};

struct FrequencyInterval {
    double low_hz = 0.0;
    double high_hz = 0.0;
};

struct ValidBand {
    std::vector<FrequencyInterval> intervals;
    double threshold = 0.8;

    /// Fraction of [low_hz, high_hz] covered by the valid intervals.
    double coverage(double low_hz, double high_hz) const;
};

struct Resonance {
    double freq_hz = 0.0;
    double magnitude = 0.0;
};

struct ResonancePick {
    std::vector<Resonance> peaks;  // ascending frequency
    bool incomplete = false;       // fewer than the requested count qualified
};

struct PeakOptions {
    std::size_t neighbourhood_bins = 50;
    double prominence = 3.0;  // factor over the neighbourhood median
};

std::vector<double> make_window(WindowKind kind, std::size_t n);

/// One-sided Welch density estimate. Throws TooShortError when seg_len exceeds the series.
Spectrum psd(const TimeSeries& ts, const WelchOptions& opts = {});
Spectrum psd(const TimeSeries& ts, std::size_t seg_len, double overlap_frac,
             WindowKind window = WindowKind::hann);

/// E[conj(X) Y], one-sided, same scaling as psd. cpsd(x, x) reproduces psd(x).
Spectrum cpsd(const TimeSeries& x, const TimeSeries& y, const WelchOptions& opts = {});

/// |G_Fa|^2 / (G_FF G_aa) with each density averaged over every periodogram of every
/// segment before the ratio is formed. Needs at least two segments with force.
Spectrum averaged_coherence(std::span<const ImpactSegment> segments, const WelchOptions& opts);

/// Acceleration PSD averaged over every periodogram of every segment.
Spectrum averaged_psd(std::span<const ImpactSegment> segments, const WelchOptions& opts);

/// H2 receptance G_aa / (-w^2 G_aF): displacement per unit force, DC bin dropped.
/// The cross density is oriented so the ratio estimates accel/force. Bins with a vanishing
/// cross density are flagged invalid.
Spectrum receptance(const TimeSeries& force, const TimeSeries& accel, const WelchOptions& opts = {});
Spectrum receptance(std::span<const ImpactSegment> segments, const WelchOptions& opts);

/// Equivalent chi-squared degrees of freedom of a Welch average of n_segments overlapped,
/// windowed periodograms from one contiguous record.
double welch_degrees_of_freedom(const WelchOptions& opts, std::size_t n_segments);

/// nu = 2N / sum_{l=-(L-1)}^{L} w_a(l)^2 with a constant lag weight w_a.
double lag_window_degrees_of_freedom(std::size_t n_observations, std::size_t window_size,
                                     double lag_weight = 0.5);

/// Multiplicative chi-squared band: center * nu / chi2_nu(1 - alpha/2) .. center * nu /
/// chi2_nu(alpha/2). Constant width on a log scale.
ConfidenceBand psd_confidence(const Spectrum& center, double nu, double alpha = 0.05);

/// Band with nu from the lag-window formula using window size L = N and lag weight 0.5.
ConfidenceBand psd_confidence_from_observations(const Spectrum& center,
                                                std::size_t n_observations, double alpha = 0.05);

/// Maximal runs of bins with coherence >= threshold, runs shorter than 3 bins dropped.
ValidBand valid_band(const Spectrum& coherence, double threshold = 0.8);

/// k largest qualifying local maxima inside [band_low, band_high].
ResonancePick pick_resonances(const Spectrum& spec, double band_low_hz, double band_high_hz,
                              std::size_t k, const PeakOptions& opts = {});

/// `freq_hz,value_re,value_im` with 9 significant digits.
void write_spectrum_csv(std::ostream& out, const Spectrum& spec);

void to_json(nlohmann::json& j, const Spectrum& spec);
void to_json(nlohmann::json& j, const ConfidenceBand& band);
void to_json(nlohmann::json& j, const ValidBand& band);

const char* to_string(SpectrumKind kind);

}  // namespace modalid
