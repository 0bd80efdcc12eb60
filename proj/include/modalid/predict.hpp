#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "modalid/compose.hpp"
#include "modalid/time_series.hpp"

namespace modalid {

struct InitialStateEstimate {
    Eigen::VectorXd x0;
    double residual_norm = 0.0;  // || O x0 - y ||
    std::size_t horizon = 0;
};

/// Least squares on [C; CA; ...; CA^(m-1)] x0 = y[0..m). Throws UnobservableModelError when
/// the observability matrix has rank below the model order.
InitialStateEstimate estimate_initial_state(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& C,
                                            std::span<const double> measured, std::size_t horizon);
InitialStateEstimate estimate_initial_state(const CompositeModel& model, const TimeSeries& measured,
                                            std::size_t horizon);

/// y_i = C A^i x0 for i = 0..length-1.
std::vector<double> zero_input_response(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& C,
                                        const Eigen::VectorXd& x0, std::size_t length);
TimeSeries zero_input_response(const CompositeModel& model, const Eigen::VectorXd& x0, std::size_t length);

/// 100 (1 - ||a - a_hat|| / ||a - mean(a)||). May be negative.
double fit_score(std::span<const double> measured, std::span<const double> predicted);
double fit_score(const TimeSeries& measured, const TimeSeries& predicted);

struct PredictionOptions {
    double delay_s = 0.002;      // skipped after the event peak
    std::size_t horizon = 400;   // samples used for the initial state
    double fit_floor = -100.0;   // applied to reported fits
};

struct ClusterKeys {
    std::optional<std::string> train_type;
    std::optional<double> speed_kmh;
    std::optional<double> axle_load_t;
};

struct EventPrediction {
    std::size_t event_index = 0;
    double peak_time = 0.0;
    Eigen::VectorXd x0;
    TimeSeries predicted;
    TimeSeries measured;
    double fit_pct = 0.0;  // raw, not floored
};

struct FitReport {
    std::string location_id;
    std::vector<EventPrediction> per_event;
    double mean_fit = 0.0;  // over floored fits
    double std_fit = 0.0;   // sample standard deviation, 0 for one event
    std::size_t excluded = 0;
    std::vector<std::string> exclusion_reasons;
    ClusterKeys keys;
    double fit_floor = -100.0;

    double reported_fit(const EventPrediction& e) const { return std::max(e.fit_pct, fit_floor); }
    /// Recomputes mean_fit and std_fit from per_event.
    void summarize();
};

/// Segments must already be filtered to the model's band. For each: skip the delay,
/// estimate x0 over the horizon, predict the rest of the window and score it. Failing events
/// are excluded and counted; throws when none survives or segments is empty.
FitReport validate_events(const CompositeModel& model, std::span<const ImpactSegment> segments,
                          const PredictionOptions& opts = {});

enum class ClusterKey { train_type, speed, axle_load };

/// Group-by on one key, groups in ascending key order. Throws MetadataError naming every
/// report that lacks the key.
std::vector<FitReport> clustered_report(std::span<const FitReport> reports, ClusterKey key);

void to_json(nlohmann::json& j, const FitReport& r);
void to_json(nlohmann::json& j, const ClusterKeys& k);
void from_json(const nlohmann::json& j, ClusterKeys& k);

/// `location,event,fit_pct,train_type,speed_kmh,axle_load_t`, floored fits.
void write_fit_csv(std::ostream& out, std::span<const FitReport> reports);

}  // namespace modalid
