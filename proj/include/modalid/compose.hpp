#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "modalid/era.hpp"
#include "modalid/filter.hpp"
#include "modalid/spectral.hpp"
#include "modalid/time_series.hpp"

namespace modalid {

struct IdentificationConfig {
    double split_hz = 200.0;
    double preprocess_lowpass_hz = 800.0;
    FrequencyInterval low_band{10.0, 200.0};
    FrequencyInterval high_band{200.0, 800.0};
    std::size_t band_order = 2;
    std::optional<std::size_t> hankel_n;  // default_hankel_size of the usable window when absent
    double coherence_threshold = 0.8;
    // Samples skipped after the impact peak so filter transients do not enter the Hankel matrix.
    double identification_delay_s = 0.01;
    // Band edges below this are nominal: no highpass is applied for them.
    double min_filter_edge_hz = 50.0;
    // A band whose coherence-valid coverage falls below this fraction is left out.
    double min_band_coverage = 0.5;
    double identification_fraction = 0.5;
    std::uint64_t seed = 0;

    /// Throws ConfigurationError for unordered or overlapping bands.
    void validate() const;
};

/// One order-2 (by default) band identification with its per-impact spread.
struct BandModel {
    StateSpaceRealization realization;  // real modal form, c = [1 0 ...]
    FrequencyInterval band;
    ModalParameters modes;
    std::size_t segments_used = 0;
    std::vector<std::string> diagnostics;  // rejected segments
};

/// Output connection of band models: block-diagonal A, concatenated C.
struct CompositeModel {
    Eigen::MatrixXd A;
    Eigen::RowVectorXd C;
    Eigen::VectorXd B;  // size 0 unless every band carries an input vector
    double Ts = 0.0;
    std::string location_id;
    std::vector<BandModel> bands;
    ModalParameters modes;

    std::size_t order() const noexcept { return static_cast<std::size_t>(A.rows()); }
    double sample_rate() const noexcept { return 1.0 / Ts; }
    /// Lowest and highest band edge.
    FrequencyInterval overall_band() const;
};

struct LocationIdentification {
    CompositeModel model;
    std::vector<std::string> warnings;  // excluded or failed bands
};

/// Real modal form of an observable realization with distinct complex eigenvalues:
/// diag([[Re, Im], [-Im, Re]]) blocks in ascending frequency, c = [1 0 1 0 ...].
StateSpaceRealization to_modal_form(const StateSpaceRealization& r);

/// Modal-form realization with prescribed modes (ascending frequency) and optional input.
StateSpaceRealization modal_realization(const ModalParameters& modes, const Eigen::VectorXd& b = {});

/// Acceleration preprocessing: lowpass at cfg.preprocess_lowpass_hz, zero padding past the
/// segment ends because the track is at rest before the impact.
TimeSeries preprocess_impact(const TimeSeries& accel, const IdentificationConfig& cfg);

/// Band filter applied after preprocessing.
TimeSeries band_filter(const TimeSeries& preprocessed, FrequencyInterval band,
                       const IdentificationConfig& cfg, EdgePadding padding = EdgePadding::zero);

/// Per-segment ERA at cfg.band_order followed by modal aggregation. Segments whose
/// realization is unstable, overdamped or has a mode outside the band are rejected.
/// Throws IdentificationFailedError when every segment is rejected.
BandModel identify_band(std::span<const ImpactSegment> segments, FrequencyInterval band,
                        const IdentificationConfig& cfg);

/// Throws ConfigurationError on a sampling-time mismatch or an empty band list.
CompositeModel compose(std::span<const BandModel> bands, std::string location_id = {});
CompositeModel compose(const BandModel& low, const std::optional<BandModel>& high,
                       std::string location_id = {});

/// Full pipeline. `gate` is the coherence-valid band; bands it covers less than
/// cfg.min_band_coverage are excluded with a warning, and a band that fails identification
/// is dropped with a warning. Throws IdentificationFailedError if no band survives.
LocationIdentification identify_location(std::span<const ImpactSegment> segments,
                                         const IdentificationConfig& cfg,
                                         const std::optional<ValidBand>& gate = std::nullopt,
                                         std::string location_id = {});

/// Seeded disjoint split into (identification, validation) indices, each ascending.
/// With two or more items both sides are non-empty.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count,
                                                                            double identification_fraction,
                                                                            std::uint64_t seed);

void to_json(nlohmann::json& j, const IdentificationConfig& cfg);
void from_json(const nlohmann::json& j, IdentificationConfig& cfg);
void to_json(nlohmann::json& j, const BandModel& m);
void to_json(nlohmann::json& j, const CompositeModel& m);
void from_json(const nlohmann::json& j, CompositeModel& m);

}  // namespace modalid
