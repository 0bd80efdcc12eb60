#include "modalid/compose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "modalid/csv_io.hpp"
#include "modalid/error.hpp"
#include "modalid/filter.hpp"

namespace modalid {
namespace {

std::string band_label(FrequencyInterval b) {
    return "[" + format_sig(b.low_hz, 6) + ", " + format_sig(b.high_hz, 6) + "] Hz";
}

Eigen::MatrixXd observability(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& c) {
    const Eigen::Index n = A.rows();
    Eigen::MatrixXd O(n, n);
    Eigen::RowVectorXd row = c;
    for (Eigen::Index i = 0; i < n; ++i) {
        O.row(i) = row;
        row = row * A;
    }
    return O;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index k = 0; k < m.cols(); ++k) out.push_back(m(i, k));
    return out;
}

Eigen::MatrixXd square_from(const std::vector<double>& v, std::size_t n) {
    if (v.size() != n * n) throw ParseError("matrix size does not match order", 0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i * n + k];
    return m;
}

}  // namespace

void IdentificationConfig::validate() const {
    auto ordered = [](FrequencyInterval b) { return b.low_hz >= 0.0 && b.high_hz > b.low_hz; };
    if (!ordered(low_band) || !ordered(high_band)) {
        throw ConfigurationError("band edges must satisfy 0 <= low < high");
    }
    if (low_band.high_hz > high_band.low_hz) {
        throw ConfigurationError("low band " + band_label(low_band) + " overlaps high band " +
                                 band_label(high_band));
    }
    if (!(split_hz >= low_band.high_hz && split_hz <= high_band.low_hz)) {
        throw ConfigurationError("split frequency must separate the bands");
    }
    if (!(preprocess_lowpass_hz > 0.0)) throw ConfigurationError("preprocessing lowpass must be positive");
    if (band_order == 0 || band_order % 2 != 0) throw ConfigurationError("band order must be even and positive");
    if (!(coherence_threshold >= 0.0 && coherence_threshold <= 1.0)) {
        throw ConfigurationError("coherence threshold must lie in [0, 1]");
    }
    if (!(identification_delay_s >= 0.0)) throw ConfigurationError("identification delay must be non-negative");
    if (!(identification_fraction > 0.0 && identification_fraction <= 1.0)) {
        throw ConfigurationError("identification fraction must lie in (0, 1]");
    }
}

FrequencyInterval CompositeModel::overall_band() const {
    FrequencyInterval out{0.0, 0.0};
    bool first = true;
    for (const auto& b : bands) {
        if (first) out = b.band;
        out.low_hz = std::min(out.low_hz, b.band.low_hz);
        out.high_hz = std::max(out.high_hz, b.band.high_hz);
        first = false;
    }
    return out;
}

StateSpaceRealization modal_realization(const ModalParameters& modes, const Eigen::VectorXd& b) {
    const auto n = static_cast<Eigen::Index>(2 * modes.modes.size());
    StateSpaceRealization r;
    r.Ts = modes.Ts;
    r.A = Eigen::MatrixXd::Zero(n, n);
    r.c = Eigen::RowVectorXd::Zero(n);
    for (std::size_t k = 0; k < modes.modes.size(); ++k) {
        const auto& m = modes.modes[k];
        if (m.overdamped || m.eigenvalue.imag() <= 0.0) {
            throw InvalidParameterError("modal form needs complex modes");
        }
        const auto i = static_cast<Eigen::Index>(2 * k);
        r.A(i, i) = m.eigenvalue.real();
        r.A(i, i + 1) = m.eigenvalue.imag();
        r.A(i + 1, i) = -m.eigenvalue.imag();
        r.A(i + 1, i + 1) = m.eigenvalue.real();
        r.c(i) = 1.0;
    }
    if (b.size() == n) r.b = b;
    return r;
}

StateSpaceRealization to_modal_form(const StateSpaceRealization& r) {
    const auto modes = modal_parameters(r);
    StateSpaceRealization m = modal_realization(modes);
    if (m.order() != r.order()) throw InvalidParameterError("modal form needs complex modes");
    const Eigen::MatrixXd Or = observability(r.A, r.c);
    const Eigen::MatrixXd Om = observability(m.A, m.c);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(Om);
    if (!lu.isInvertible() || Eigen::FullPivLU<Eigen::MatrixXd>(Or).rank() < Or.rows()) {
        throw UnobservableModelError("realization is not observable");
    }
    if (r.has_input()) m.b = lu.solve(Or * r.b);
    return m;
}

TimeSeries preprocess_impact(const TimeSeries& accel, const IdentificationConfig& cfg) {
    if (cfg.preprocess_lowpass_hz >= accel.nyquist()) return accel;
    return apply_filter(accel, FilterSpec::lowpass(cfg.preprocess_lowpass_hz, EdgePadding::zero));
}

TimeSeries band_filter(const TimeSeries& preprocessed, FrequencyInterval band,
                       const IdentificationConfig& cfg, EdgePadding padding) {
    TimeSeries out = preprocessed;
    if (band.low_hz >= cfg.min_filter_edge_hz) out = apply_filter(out, FilterSpec::highpass(band.low_hz, padding));
    if (band.high_hz < cfg.preprocess_lowpass_hz && band.high_hz < out.nyquist()) {
        out = apply_filter(out, FilterSpec::lowpass(band.high_hz, padding));
    }
    return out;
}

BandModel identify_band(std::span<const ImpactSegment> segments, FrequencyInterval band,
                        const IdentificationConfig& cfg) {
    if (segments.empty()) throw InvalidParameterError("no segments to identify from");
    std::vector<ModalParameters> per_segment;
    std::vector<Eigen::VectorXd> inputs;
    std::vector<std::string> diagnostics;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const std::string tag = "segment " + std::to_string(segments[i].event_index) + ": ";
        try {
            const auto& accel = segments[i].accel_window;
            accel.validate();
            const TimeSeries y = band_filter(preprocess_impact(accel, cfg), band, cfg);
            const auto delay = static_cast<std::size_t>(std::llround(cfg.identification_delay_s * y.sample_rate));
            if (y.size() <= delay + 2 * cfg.band_order) throw TooShortError("window shorter than the identification delay");
            const std::size_t n = cfg.hankel_n.value_or(default_hankel_size(y.size() - delay));
            const auto h = build_hankel(y.view().subspan(delay), n);
            const auto r = era_realize(h, cfg.band_order, y.sample_time());
            const auto mp = modal_parameters(r);
            if (!r.stable()) {
                diagnostics.push_back(tag + "unstable realization, spectral radius " + format_sig(r.spectral_radius(), 6));
                continue;
            }
            bool ok = mp.modes.size() * 2 == cfg.band_order;
            for (const auto& m : mp.modes) {
                if (m.overdamped) {
                    diagnostics.push_back(tag + "overdamped pole at " + format_sig(m.freq_hz, 6) + " Hz");
                    ok = false;
                    break;
                }
                if (m.freq_hz < band.low_hz || m.freq_hz > band.high_hz) {
                    diagnostics.push_back(tag + "mode at " + format_sig(m.freq_hz, 6) + " Hz lies outside " +
                                          band_label(band));
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            inputs.push_back(to_modal_form(r).b);
            per_segment.push_back(mp);
        } catch (const Error& e) {
            diagnostics.push_back(tag + e.what());
        }
    }
    if (per_segment.empty()) {
        throw IdentificationFailedError("no stable in-band realization for " + band_label(band), diagnostics);
    }

    BandModel out;
    out.band = band;
    out.segments_used = per_segment.size();
    out.diagnostics = std::move(diagnostics);
    out.modes = per_segment.size() >= 2 ? aggregate_uncertainty(per_segment) : per_segment.front();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * out.modes.modes.size()));
    for (const auto& v : inputs) b += v;
    b /= static_cast<double>(inputs.size());
    out.realization = modal_realization(out.modes, b);
    return out;
}

CompositeModel compose(std::span<const BandModel> bands, std::string location_id) {
    if (bands.empty()) throw ConfigurationError("nothing to compose");
    const double Ts = bands.front().realization.Ts;
    Eigen::Index n = 0;
    bool with_input = true;
    for (const auto& b : bands) {
        if (std::abs(b.realization.Ts - Ts) > 1e-12 * Ts) {
            throw ConfigurationError("band models disagree on the sampling time");
        }
        n += static_cast<Eigen::Index>(b.realization.order());
        with_input = with_input && b.realization.has_input();
    }
    CompositeModel m;
    m.Ts = Ts;
    m.location_id = std::move(location_id);
    m.A = Eigen::MatrixXd::Zero(n, n);
    m.C = Eigen::RowVectorXd::Zero(n);
    if (with_input) m.B = Eigen::VectorXd::Zero(n);
    m.modes.Ts = Ts;
    m.modes.sources = 0;
    Eigen::Index at = 0;
    for (const auto& b : bands) {
        const auto k = static_cast<Eigen::Index>(b.realization.order());
        m.A.block(at, at, k, k) = b.realization.A;
        m.C.segment(at, k) = b.realization.c;
        if (with_input) m.B.segment(at, k) = b.realization.b;
        at += k;
        for (const auto& md : b.modes.modes) m.modes.modes.push_back(md);
        m.modes.sources = std::max(m.modes.sources, b.modes.sources);
        m.modes.unpaired += b.modes.unpaired;
        m.bands.push_back(b);
    }
    std::stable_sort(m.modes.modes.begin(), m.modes.modes.end(),
                     [](const Mode& a, const Mode& b) { return a.freq_hz < b.freq_hz; });
    return m;
}

CompositeModel compose(const BandModel& low, const std::optional<BandModel>& high, std::string location_id) {
    std::vector<BandModel> bands{low};
    if (high) bands.push_back(*high);
    return compose(bands, std::move(location_id));
}

LocationIdentification identify_location(std::span<const ImpactSegment> segments,
                                         const IdentificationConfig& cfg,
                                         const std::optional<ValidBand>& gate, std::string location_id) {
    cfg.validate();
    if (segments.empty()) throw InvalidParameterError("no segments to identify from");
    LocationIdentification out;
    std::vector<BandModel> bands;
    std::vector<std::string> diagnostics;
    for (const auto band : {cfg.low_band, cfg.high_band}) {
        if (gate) {
            const double cover = gate->coverage(band.low_hz, band.high_hz);
            if (cover < cfg.min_band_coverage) {
                out.warnings.push_back("band " + band_label(band) + " excluded: coherence-valid coverage " +
                                       format_sig(100.0 * cover, 3) + "%");
                continue;
            }
        }
        try {
            bands.push_back(identify_band(segments, band, cfg));
        } catch (const IdentificationFailedError& e) {
            out.warnings.push_back(std::string("band dropped: ") + e.what());
            for (const auto& d : e.diagnostics()) diagnostics.push_back(band_label(band) + " " + d);
        }
    }
    if (bands.empty()) {
        std::vector<std::string> all = out.warnings;
        all.insert(all.end(), diagnostics.begin(), diagnostics.end());
        throw IdentificationFailedError("no frequency band could be identified", all);
    }
    out.model = compose(bands, std::move(location_id));
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count,
                                                                            double identification_fraction,
                                                                            std::uint64_t seed) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_id = static_cast<std::size_t>(std::llround(identification_fraction * static_cast<double>(count)));
    n_id = std::max<std::size_t>(n_id, count > 0 ? 1 : 0);
    if (count >= 2) n_id = std::min(n_id, count - 1);
    std::vector<std::size_t> id(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_id));
    std::vector<std::size_t> val(idx.begin() + static_cast<std::ptrdiff_t>(n_id), idx.end());
    std::sort(id.begin(), id.end());
    std::sort(val.begin(), val.end());
    return {id, val};
}

void to_json(nlohmann::json& j, const IdentificationConfig& cfg) {
    j = nlohmann::json{{"split_hz", cfg.split_hz},
                       {"preprocess_lowpass_hz", cfg.preprocess_lowpass_hz},
                       {"low_band", {cfg.low_band.low_hz, cfg.low_band.high_hz}},
                       {"high_band", {cfg.high_band.low_hz, cfg.high_band.high_hz}},
                       {"band_order", cfg.band_order},
                       {"hankel_n", cfg.hankel_n ? nlohmann::json(*cfg.hankel_n) : nlohmann::json(nullptr)},
                       {"coherence_threshold", cfg.coherence_threshold},
                       {"identification_delay_s", cfg.identification_delay_s},
                       {"min_filter_edge_hz", cfg.min_filter_edge_hz},
                       {"min_band_coverage", cfg.min_band_coverage},
                       {"identification_fraction", cfg.identification_fraction},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, IdentificationConfig& cfg) {
    IdentificationConfig d;
    auto band = [&](const char* key, FrequencyInterval fallback) {
        if (!j.contains(key)) return fallback;
        const auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != 2) throw ConfigurationError(std::string(key) + " needs two edges");
        return FrequencyInterval{v[0], v[1]};
    };
    cfg.split_hz = j.value("split_hz", d.split_hz);
    cfg.preprocess_lowpass_hz = j.value("preprocess_lowpass_hz", d.preprocess_lowpass_hz);
    cfg.low_band = band("low_band", d.low_band);
    cfg.high_band = band("high_band", d.high_band);
    cfg.band_order = j.value("band_order", d.band_order);
    cfg.hankel_n = (j.contains("hankel_n") && !j.at("hankel_n").is_null())
                       ? std::optional<std::size_t>(j.at("hankel_n").get<std::size_t>())
                       : std::nullopt;
    cfg.coherence_threshold = j.value("coherence_threshold", d.coherence_threshold);
    cfg.identification_delay_s = j.value("identification_delay_s", d.identification_delay_s);
    cfg.min_filter_edge_hz = j.value("min_filter_edge_hz", d.min_filter_edge_hz);
    cfg.min_band_coverage = j.value("min_band_coverage", d.min_band_coverage);
    cfg.identification_fraction = j.value("identification_fraction", d.identification_fraction);
    cfg.seed = j.value("seed", d.seed);
    cfg.validate();
}

void to_json(nlohmann::json& j, const BandModel& m) {
    j = nlohmann::json{{"band", {m.band.low_hz, m.band.high_hz}},
                       {"segments_used", m.segments_used},
                       {"realization", m.realization},
                       {"modes", m.modes},
                       {"diagnostics", m.diagnostics}};
}

void to_json(nlohmann::json& j, const CompositeModel& m) {
    j = nlohmann::json{{"location_id", m.location_id},
                       {"Ts", m.Ts},
                       {"order", m.order()},
                       {"A", flatten(m.A)},
                       {"C", flatten(m.C)},
                       {"B", m.B.size() > 0 ? nlohmann::json(flatten(m.B)) : nlohmann::json(nullptr)},
                       {"bands", m.bands},
                       {"modes", m.modes}};
}

void from_json(const nlohmann::json& j, CompositeModel& m) {
    const auto n = j.at("order").get<std::size_t>();
    m.location_id = j.value("location_id", std::string{});
    m.Ts = j.at("Ts").get<double>();
    if (!(m.Ts > 0.0)) throw ParseError("model sampling time must be positive", 0);
    m.A = square_from(j.at("A").get<std::vector<double>>(), n);
    const auto c = j.at("C").get<std::vector<double>>();
    if (c.size() != n) throw ParseError("output row size does not match order", 0);
    m.C = Eigen::Map<const Eigen::RowVectorXd>(c.data(), static_cast<Eigen::Index>(n));
    m.B.resize(0);
    if (j.contains("B") && !j.at("B").is_null()) {
        const auto b = j.at("B").get<std::vector<double>>();
        if (b.size() != n) throw ParseError("input vector size does not match order", 0);
        m.B = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(n));
    }
    m.bands.clear();
    for (const auto& e : j.value("bands", nlohmann::json::array())) {
        BandModel b;
        const auto edges = e.at("band").get<std::vector<double>>();
        if (edges.size() != 2) throw ParseError("band needs two edges", 0);
        b.band = {edges[0], edges[1]};
        b.segments_used = e.value("segments_used", std::size_t{0});
        b.realization = e.at("realization").get<StateSpaceRealization>();
        b.modes = e.at("modes").get<ModalParameters>();
        b.diagnostics = e.value("diagnostics", std::vector<std::string>{});
        m.bands.push_back(std::move(b));
    }
    m.modes = j.contains("modes") ? j.at("modes").get<ModalParameters>() : modal_parameters(m.A, m.Ts);
}

}  // namespace modalid
