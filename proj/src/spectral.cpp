#include "modalid/spectral.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "modalid/csv_io.hpp"
#include "modalid/error.hpp"
#include "modalid/fft.hpp"

namespace modalid {
namespace {

using cplx = std::complex<double>;

std::size_t step_of(const WelchOptions& opts) {
    const auto overlap = static_cast<std::size_t>(
        std::llround(opts.overlap_frac * static_cast<double>(opts.seg_len)));
    return std::max<std::size_t>(1, opts.seg_len - std::min(overlap, opts.seg_len));
}

void check_options(const WelchOptions& opts) {
    if (opts.seg_len < 2) throw InvalidParameterError("segment length must be at least 2");
    if (!(opts.overlap_frac >= 0.0 && opts.overlap_frac < 1.0)) {
        throw InvalidParameterError("overlap fraction must lie in [0, 1)");
    }
}

// Running sum of conj(X) Y over periodograms sharing one window and sample rate.
class CrossAccumulator {
public:
    CrossAccumulator(const WelchOptions& opts, double fs)
        : opts_(opts), fs_(fs), window_(make_window(opts.window, opts.seg_len)),
          sum_(opts.seg_len / 2 + 1, cplx{}) {
        check_options(opts);
    }

    void add(std::span<const double> x, std::span<const double> y, bool same) {
        const std::size_t n = x.size();
        if (opts_.seg_len > n) {
            throw TooShortError("segment length " + std::to_string(opts_.seg_len) +
                                " exceeds series length " + std::to_string(n));
        }
        const std::size_t step = step_of(opts_);
        std::vector<double> buf(opts_.seg_len);
        for (std::size_t start = 0; start + opts_.seg_len <= n; start += step) {
            for (std::size_t i = 0; i < opts_.seg_len; ++i) buf[i] = window_[i] * x[start + i];
            const auto fx = rfft(buf);
            if (same) {
                for (std::size_t k = 0; k < fx.size(); ++k) sum_[k] += std::norm(fx[k]);
            } else {
                for (std::size_t i = 0; i < opts_.seg_len; ++i) buf[i] = window_[i] * y[start + i];
                const auto fy = rfft(buf);
                for (std::size_t k = 0; k < fx.size(); ++k) sum_[k] += std::conj(fx[k]) * fy[k];
            }
            ++count_;
        }
    }

    Spectrum finish(SpectrumKind kind) const {
        const std::size_t len = opts_.seg_len;
        double wss = 0.0;
        for (double w : window_) wss += w * w;
        const double scale = 1.0 / (fs_ * wss * static_cast<double>(count_));
        Spectrum s;
        s.kind = kind;
        s.n_averages = count_;
        s.segment_length = len;
        s.freqs.resize(sum_.size());
        s.values.resize(sum_.size());
        const std::size_t last_doubled = len % 2 == 0 ? len / 2 - 1 : len / 2;
        for (std::size_t k = 0; k < sum_.size(); ++k) {
            s.freqs[k] = static_cast<double>(k) * fs_ / static_cast<double>(len);
            const double side = (k >= 1 && k <= last_doubled) ? 2.0 : 1.0;
            s.values[k] = sum_[k] * (scale * side);
            if (kind == SpectrumKind::psd) s.values[k] = {s.values[k].real(), 0.0};
        }
        return s;
    }

private:
    WelchOptions opts_;
    double fs_;
    std::vector<double> window_;
    std::vector<cplx> sum_;
    std::size_t count_ = 0;
};

void require_aligned(const TimeSeries& x, const TimeSeries& y) {
    x.validate();
    y.validate();
    if (x.size() != y.size() || x.sample_rate != y.sample_rate) {
        throw AlignmentError("series '" + x.label + "' and '" + y.label + "' are not aligned");
    }
}

double common_rate(std::span<const ImpactSegment> segments) {
    const double fs = segments.front().accel_window.sample_rate;
    for (const auto& s : segments) {
        if (s.accel_window.sample_rate != fs) {
            throw AlignmentError("segments have different sample rates");
        }
    }
    return fs;
}

struct ImpactSums {
    Spectrum ff, aa, fa;
};

ImpactSums impact_sums(std::span<const ImpactSegment> segments, const WelchOptions& opts) {
    if (segments.empty()) throw InvalidParameterError("no segments");
    const double fs = common_rate(segments);
    CrossAccumulator ff(opts, fs), aa(opts, fs), fa(opts, fs);
    for (const auto& seg : segments) {
        if (!seg.force_window) {
            throw InvalidParameterError("segment " + std::to_string(seg.event_index) +
                                        " has no force channel");
        }
        require_aligned(*seg.force_window, seg.accel_window);
        ff.add(seg.force_window->samples, seg.force_window->samples, true);
        aa.add(seg.accel_window.samples, seg.accel_window.samples, true);
        fa.add(seg.force_window->samples, seg.accel_window.samples, false);
    }
    return {ff.finish(SpectrumKind::psd), aa.finish(SpectrumKind::psd),
            fa.finish(SpectrumKind::cpsd)};
}

Spectrum receptance_from(const Spectrum& aa, const Spectrum& fa) {
    Spectrum out;
    out.kind = SpectrumKind::receptance;
    out.n_averages = aa.n_averages;
    out.segment_length = aa.segment_length;
    double cross_max = 0.0;
    for (const auto& v : fa.values) cross_max = std::max(cross_max, std::abs(v));
    for (std::size_t k = 1; k < aa.size(); ++k) {
        const double w = 2.0 * std::numbers::pi * aa.freqs[k];
        const cplx cross_af = std::conj(fa.values[k]);
        out.freqs.push_back(aa.freqs[k]);
        const bool ok = std::abs(cross_af) > 1e-300 && std::abs(cross_af) > 1e-14 * cross_max;
        out.values.push_back(ok ? aa.values[k].real() / (-w * w * cross_af) : cplx{});
        out.valid.push_back(ok);
    }
    if (std::all_of(out.valid.begin(), out.valid.end(), [](bool b) { return b; })) out.valid.clear();
    return out;
}

}  // namespace

std::vector<double> Spectrum::real() const {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](cplx v) { return v.real(); });
    return out;
}

std::vector<double> Spectrum::magnitude() const {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](cplx v) { return std::abs(v); });
    return out;
}

double ValidBand::coverage(double low_hz, double high_hz) const {
    if (!(high_hz > low_hz)) return 0.0;
    double covered = 0.0;
    for (const auto& iv : intervals) {
        covered += std::max(0.0, std::min(high_hz, iv.high_hz) - std::max(low_hz, iv.low_hz));
    }
    return covered / (high_hz - low_hz);
}

std::vector<double> make_window(WindowKind kind, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (kind == WindowKind::hann && n > 1) {
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                        static_cast<double>(n - 1));
        }
    }
    return w;
}

Spectrum psd(const TimeSeries& ts, const WelchOptions& opts) {
    ts.validate();
    CrossAccumulator acc(opts, ts.sample_rate);
    acc.add(ts.samples, ts.samples, true);
    return acc.finish(SpectrumKind::psd);
}

Spectrum psd(const TimeSeries& ts, std::size_t seg_len, double overlap_frac, WindowKind window) {
    return psd(ts, WelchOptions{seg_len, overlap_frac, window});
}

Spectrum cpsd(const TimeSeries& x, const TimeSeries& y, const WelchOptions& opts) {
    require_aligned(x, y);
    CrossAccumulator acc(opts, x.sample_rate);
    const bool same = &x == &y || x.samples == y.samples;
    acc.add(x.samples, y.samples, same);
    return acc.finish(SpectrumKind::cpsd);
}

Spectrum averaged_coherence(std::span<const ImpactSegment> segments, const WelchOptions& opts) {
    if (segments.size() < 2) {
        throw DegenerateCoherenceError(
            "averaged coherence needs at least two segments (one average is identically 1)");
    }
    const auto sums = impact_sums(segments, opts);
    Spectrum out;
    out.kind = SpectrumKind::coherence;
    out.n_averages = sums.ff.n_averages;
    out.segment_length = sums.ff.segment_length;
    out.freqs = sums.ff.freqs;
    out.values.resize(out.freqs.size());
    for (std::size_t k = 0; k < out.freqs.size(); ++k) {
        const double den = sums.ff.values[k].real() * sums.aa.values[k].real();
        double c = den > 0.0 ? std::norm(sums.fa.values[k]) / den : 0.0;
        if (c > 1.0 + 1e-9) throw std::logic_error("coherence exceeds 1 beyond rounding");
        c = std::clamp(c, 0.0, 1.0);
        out.values[k] = c;
    }
    return out;
}

Spectrum averaged_psd(std::span<const ImpactSegment> segments, const WelchOptions& opts) {
    if (segments.empty()) throw InvalidParameterError("no segments");
    CrossAccumulator acc(opts, common_rate(segments));
    for (const auto& seg : segments) {
        seg.accel_window.validate();
        acc.add(seg.accel_window.samples, seg.accel_window.samples, true);
    }
    return acc.finish(SpectrumKind::psd);
}

Spectrum receptance(const TimeSeries& force, const TimeSeries& accel, const WelchOptions& opts) {
    require_aligned(force, accel);
    CrossAccumulator aa(opts, force.sample_rate), fa(opts, force.sample_rate);
    aa.add(accel.samples, accel.samples, true);
    fa.add(force.samples, accel.samples, false);
    return receptance_from(aa.finish(SpectrumKind::psd), fa.finish(SpectrumKind::cpsd));
}

Spectrum receptance(std::span<const ImpactSegment> segments, const WelchOptions& opts) {
    const auto sums = impact_sums(segments, opts);
    return receptance_from(sums.aa, sums.fa);
}

double welch_degrees_of_freedom(const WelchOptions& opts, std::size_t n_segments) {
    check_options(opts);
    if (n_segments == 0) throw InvalidParameterError("no segments");
    const auto w = make_window(opts.window, opts.seg_len);
    const std::size_t step = step_of(opts);
    double wss = 0.0;
    for (double v : w) wss += v * v;
    const double k = static_cast<double>(n_segments);
    double corr = 0.0;
    for (std::size_t m = 1; m < n_segments && m * step < opts.seg_len; ++m) {
        double rho = 0.0;
        for (std::size_t i = 0; i + m * step < opts.seg_len; ++i) rho += w[i] * w[i + m * step];
        rho /= wss;
        corr += (1.0 - static_cast<double>(m) / k) * rho * rho;
    }
    return 2.0 * k / (1.0 + 2.0 * corr);
}

double lag_window_degrees_of_freedom(std::size_t n_observations, std::size_t window_size,
                                     double lag_weight) {
    if (n_observations == 0 || window_size == 0 || lag_weight == 0.0) {
        throw InvalidParameterError("degenerate lag window");
    }
    const double lags = 2.0 * static_cast<double>(window_size);
    return 2.0 * static_cast<double>(n_observations) / (lags * lag_weight * lag_weight);
}

ConfidenceBand psd_confidence(const Spectrum& center, double nu, double alpha) {
    if (center.kind != SpectrumKind::psd) {
        throw InvalidParameterError("confidence bands apply to PSD estimates");
    }
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw InvalidParameterError("degrees of freedom must be positive");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameterError("alpha must lie in (0, 1)");
    const boost::math::chi_squared dist(nu);
    const double lo_ratio = nu / boost::math::quantile(dist, 1.0 - alpha / 2.0);
    const double hi_ratio = nu / boost::math::quantile(dist, alpha / 2.0);
    ConfidenceBand band;
    band.center = center;
    band.lower = center;
    band.upper = center;
    band.alpha = alpha;
    band.nu = nu;
    for (std::size_t k = 0; k < center.size(); ++k) {
        band.lower.values[k] = center.values[k].real() * lo_ratio;
        band.upper.values[k] = center.values[k].real() * hi_ratio;
    }
    return band;
}

ConfidenceBand psd_confidence_from_observations(const Spectrum& center,
                                                std::size_t n_observations, double alpha) {
    return psd_confidence(center, lag_window_degrees_of_freedom(n_observations, n_observations),
                          alpha);
}

ValidBand valid_band(const Spectrum& coherence, double threshold) {
    if (coherence.kind != SpectrumKind::coherence) {
        throw InvalidParameterError("valid_band expects a coherence spectrum");
    }
    ValidBand out;
    out.threshold = threshold;
    const std::size_t n = coherence.size();
    for (std::size_t i = 0; i < n;) {
        if (coherence.values[i].real() < threshold) {
            ++i;
            continue;
        }
        const std::size_t first = i;
        while (i < n && coherence.values[i].real() >= threshold) ++i;
        if (i - first >= 3) out.intervals.push_back({coherence.freqs[first], coherence.freqs[i - 1]});
    }
    return out;
}

ResonancePick pick_resonances(const Spectrum& spec, double band_low_hz, double band_high_hz,
                              std::size_t k, const PeakOptions& opts) {
    if (spec.kind != SpectrumKind::psd && spec.kind != SpectrumKind::receptance) {
        throw InvalidParameterError("resonances are picked from PSD or receptance spectra");
    }
    const auto mag = spec.magnitude();
    const std::size_t n = mag.size();
    const std::size_t half = opts.neighbourhood_bins / 2;
    std::vector<Resonance> found;
    std::vector<double> hood;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (spec.freqs[i] < band_low_hz || spec.freqs[i] > band_high_hz) continue;
        if (!spec.is_valid(i) || !(mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])) continue;
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n, i + half + 1);
        hood.assign(mag.begin() + static_cast<std::ptrdiff_t>(lo),
                    mag.begin() + static_cast<std::ptrdiff_t>(hi));
        std::nth_element(hood.begin(), hood.begin() + static_cast<std::ptrdiff_t>(hood.size() / 2),
                         hood.end());
        if (mag[i] > opts.prominence * hood[hood.size() / 2]) found.push_back({spec.freqs[i], mag[i]});
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const Resonance& a, const Resonance& b) { return a.magnitude > b.magnitude; });
    ResonancePick pick;
    pick.incomplete = found.size() < k;
    found.resize(std::min(found.size(), k));
    std::sort(found.begin(), found.end(),
              [](const Resonance& a, const Resonance& b) { return a.freq_hz < b.freq_hz; });
    pick.peaks = std::move(found);
    return pick;
}

const char* to_string(SpectrumKind kind) {
    switch (kind) {
        case SpectrumKind::psd: return "psd";
        case SpectrumKind::cpsd: return "cpsd";
        case SpectrumKind::coherence: return "coherence";
        case SpectrumKind::receptance: return "receptance";
    }
    return "unknown";
}

void write_spectrum_csv(std::ostream& out, const Spectrum& spec) {
    out << "freq_hz,value_re,value_im\n";
    for (std::size_t k = 0; k < spec.size(); ++k) {
        out << format_sig(spec.freqs[k]) << ',' << format_sig(spec.values[k].real()) << ','
            << format_sig(spec.values[k].imag()) << '\n';
    }
}

void to_json(nlohmann::json& j, const Spectrum& spec) {
    std::vector<double> re(spec.size()), im(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) {
        re[k] = spec.values[k].real();
        im[k] = spec.values[k].imag();
    }
    j = nlohmann::json{{"kind", to_string(spec.kind)},
                       {"n_averages", spec.n_averages},
                       {"segment_length", spec.segment_length},
                       {"freq_hz", spec.freqs},
                       {"value_re", re},
                       {"value_im", im}};
    if (!spec.valid.empty()) j["valid"] = spec.valid;
}

void to_json(nlohmann::json& j, const ConfidenceBand& band) {
    j = nlohmann::json{{"alpha", band.alpha},
                       {"nu", band.nu},
                       {"center", band.center},
                       {"lower", band.lower.real()},
                       {"upper", band.upper.real()}};
}

void to_json(nlohmann::json& j, const ValidBand& band) {
    auto intervals = nlohmann::json::array();
    for (const auto& iv : band.intervals) intervals.push_back({iv.low_hz, iv.high_hz});
    j = nlohmann::json{{"threshold", band.threshold}, {"intervals", intervals}};
}

}  // namespace modalid
