#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "modalid/csv_io.hpp"
#include "modalid/era.hpp"
#include "modalid/time_series.hpp"

namespace modalid {

/// Rail mass on a railpad, sleeper mass on ballast. Force acts on the rail.
struct TrackConfig {
    double m_rail = 30.0;
    double m_sleeper = 150.0;
    double k_pad = 3.0e8;
    double c_pad = 1.0e4;
    double k_ballast = 7.0e7;
    double c_ballast = 6.0e4;
    double sample_rate = 20000.0;

    /// Throws InvalidParameterError on non-positive masses/stiffnesses or negative damping.
    void validate() const;
};

/// Single mass-spring-damper described by its natural frequency and damping ratio.
struct OscillatorConfig {
    double freq_hz = 100.0;
    double damping = 0.05;
    double mass = 30.0;
    double sample_rate = 20000.0;
};

/// x' = A x + B u, y = C x + D u. Output is acceleration of the driven mass.
struct ContinuousSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;
    double sample_rate = 20000.0;
};

/// Zero-order-hold equivalent of a ContinuousSystem.
struct DiscreteSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;
    double Ts = 0.0;

    /// Response to input u from rest.
    std::vector<double> simulate(const std::vector<double>& u) const;
};

struct AxleSchedule {
    std::vector<double> arrival_times;  // seconds, strictly increasing
    std::vector<double> amplitudes;     // relative impulse magnitude per axle
    double speed_kmh = 0.0;
    std::string train_type;
    double axle_load_t = 0.0;

    void validate() const;
};

ContinuousSystem continuous_system(const TrackConfig& cfg);
ContinuousSystem continuous_system(const OscillatorConfig& cfg);

DiscreteSystem discretize(const ContinuousSystem& sys);

/// Exact modes from the continuous eigenvalues; the eigenvalue field holds exp(s Ts).
ModalParameters analytic_modes(const ContinuousSystem& sys);
ModalParameters analytic_modes(const TrackConfig& cfg);

/// Force window is a discrete impulse of the given amplitude at sample 0.
ImpactSegment simulate_impulse(const ContinuousSystem& sys, double duration_s, double amplitude = 1.0);
ImpactSegment simulate_impulse(const TrackConfig& cfg, double duration_s, double amplitude = 1.0);

struct NoiseOptions {
    std::optional<double> snr_db;  // white noise relative to the clean signal power
    std::uint64_t seed = 0;
};

/// Each axle is an impulse of amplitude * sched.amplitudes[i] at the nearest sample.
TimeSeries simulate_passage(const ContinuousSystem& sys, const AxleSchedule& sched,
                            double duration_s, double amplitude = 1.0, const NoiseOptions& noise = {});
TimeSeries simulate_passage(const TrackConfig& cfg, const AxleSchedule& sched, double duration_s,
                            double amplitude = 1.0, const NoiseOptions& noise = {});

/// Two-bogie four-axle passenger car: axle spacing within a bogie and bogie centre distance
/// in metres.
AxleSchedule ic3_like_schedule(double speed_kmh, double first_arrival_s = 0.1,
                               double axle_load_t = 10.0, double bogie_axle_m = 2.6,
                               double bogie_centre_m = 16.0);

struct ImpactRecordOptions {
    std::size_t impacts = 10;
    double spacing_s = 0.3;
    double first_s = 0.05;
    double amplitude = 1000.0;  // peak force sample, N
    double amplitude_jitter = 0.2;  // uniform relative spread per impact
    NoiseOptions noise;              // applied to force and acceleration independently
    /// Extra acceleration noise confined to [300, 900] Hz with this power relative to the
    /// clean acceleration. Destroys coherence in the high band only.
    std::optional<double> high_band_noise_ratio;
};

/// Force and acceleration record of repeated hammer impacts.
Record simulate_impact_record(const ContinuousSystem& sys, const ImpactRecordOptions& opts);
Record simulate_impact_record(const TrackConfig& cfg, const ImpactRecordOptions& opts);

/// In-place white noise so that signal power / noise power = 10^(snr/10).
void add_white_noise(std::vector<double>& x, double snr_db, std::uint64_t seed);

void to_json(nlohmann::json& j, const TrackConfig& cfg);
void from_json(const nlohmann::json& j, TrackConfig& cfg);
void to_json(nlohmann::json& j, const AxleSchedule& s);
void from_json(const nlohmann::json& j, AxleSchedule& s);

}  // namespace modalid
