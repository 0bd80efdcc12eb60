#include "modalid/predict.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "modalid/csv_io.hpp"
#include "modalid/error.hpp"

namespace modalid {

InitialStateEstimate estimate_initial_state(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& C,
                                            std::span<const double> measured, std::size_t horizon) {
    const auto n = static_cast<std::size_t>(A.rows());
    if (horizon < n) throw InvalidParameterError("horizon must be at least the model order");
    if (measured.size() < horizon) throw TooShortError("measurement shorter than the horizon");
    const auto m = static_cast<Eigen::Index>(horizon);
    Eigen::MatrixXd O(m, A.rows());
    Eigen::RowVectorXd row = C;
    for (Eigen::Index i = 0; i < m; ++i) {
        O.row(i) = row;
        row = row * A;
    }
    const Eigen::Map<const Eigen::VectorXd> y(measured.data(), m);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(O);
    if (static_cast<std::size_t>(qr.rank()) < n) {
        throw UnobservableModelError("observability matrix rank " + std::to_string(qr.rank()) +
                                     " below model order " + std::to_string(n));
    }
    InitialStateEstimate est;
    est.x0 = qr.solve(y);
    est.residual_norm = (O * est.x0 - y).norm();
    est.horizon = horizon;
    return est;
}

InitialStateEstimate estimate_initial_state(const CompositeModel& model, const TimeSeries& measured,
                                            std::size_t horizon) {
    return estimate_initial_state(model.A, model.C, measured.view(), horizon);
}

std::vector<double> zero_input_response(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& C,
                                        const Eigen::VectorXd& x0, std::size_t length) {
    std::vector<double> y(length);
    Eigen::VectorXd x = x0;
    for (std::size_t i = 0; i < length; ++i) {
        y[i] = C.dot(x);
        x = A * x;
    }
    return y;
}

TimeSeries zero_input_response(const CompositeModel& model, const Eigen::VectorXd& x0, std::size_t length) {
    return TimeSeries(zero_input_response(model.A, model.C, x0, length), model.sample_rate(), "predicted");
}

double fit_score(std::span<const double> measured, std::span<const double> predicted) {
    if (measured.size() != predicted.size()) throw AlignmentError("measured and predicted lengths differ");
    if (measured.size() < 2) throw TooShortError("fit score needs at least two samples");
    if (std::all_of(measured.begin(), measured.end(), [&](double v) { return v == measured.front(); })) {
        throw UndefinedScoreError("measured signal is constant");
    }
    const double mu = mean(measured);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
        num += (measured[i] - predicted[i]) * (measured[i] - predicted[i]);
        den += (measured[i] - mu) * (measured[i] - mu);
    }
    if (!(den > 0.0)) throw UndefinedScoreError("measured signal has no variation");
    return 100.0 * (1.0 - std::sqrt(num) / std::sqrt(den));
}

double fit_score(const TimeSeries& measured, const TimeSeries& predicted) {
    return fit_score(measured.view(), predicted.view());
}

void FitReport::summarize() {
    const auto n = per_event.size();
    mean_fit = 0.0;
    std_fit = 0.0;
    if (n == 0) return;
    for (const auto& e : per_event) mean_fit += reported_fit(e);
    mean_fit /= static_cast<double>(n);
    if (n < 2) return;
    double acc = 0.0;
    for (const auto& e : per_event) acc += (reported_fit(e) - mean_fit) * (reported_fit(e) - mean_fit);
    std_fit = std::sqrt(acc / static_cast<double>(n - 1));
}

FitReport validate_events(const CompositeModel& model, std::span<const ImpactSegment> segments,
                          const PredictionOptions& opts) {
    if (segments.empty()) throw InvalidParameterError("no events to validate");
    FitReport rep;
    rep.location_id = model.location_id;
    rep.fit_floor = opts.fit_floor;
    const std::size_t order = model.order();
    for (const auto& seg : segments) {
        const std::string tag = "event " + std::to_string(seg.event_index) + ": ";
        try {
            const auto& w = seg.accel_window;
            if (std::abs(w.sample_rate * model.Ts - 1.0) > 1e-9) {
                throw ConfigurationError("event sample rate differs from the model");
            }
            const auto delay = static_cast<std::size_t>(std::llround(opts.delay_s * w.sample_rate));
            if (w.size() < delay + std::max<std::size_t>(order, 2)) throw TooShortError("window too short");
            const TimeSeries measured = w.slice(delay, w.size());
            const std::size_t m = std::min(opts.horizon, measured.size());
            const auto est = estimate_initial_state(model, measured, m);
            EventPrediction ev;
            ev.event_index = seg.event_index;
            ev.peak_time = seg.peak_time;
            ev.x0 = est.x0;
            ev.predicted = zero_input_response(model, est.x0, measured.size());
            ev.predicted.t0 = measured.t0;
            ev.fit_pct = fit_score(measured, ev.predicted);
            ev.measured = measured;
            rep.per_event.push_back(std::move(ev));
        } catch (const Error& e) {
            ++rep.excluded;
            rep.exclusion_reasons.push_back(tag + e.what());
        }
    }
    if (rep.per_event.empty()) throw Error("no event could be scored");
    rep.summarize();
    return rep;
}

std::vector<FitReport> clustered_report(std::span<const FitReport> reports, ClusterKey key) {
    std::vector<std::string> offenders;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& k = reports[i].keys;
        const bool has = key == ClusterKey::train_type ? k.train_type.has_value()
                         : key == ClusterKey::speed    ? k.speed_kmh.has_value()
                                                       : k.axle_load_t.has_value();
        if (!has) offenders.push_back("report " + std::to_string(i) + " (" + reports[i].location_id + ")");
    }
    if (!offenders.empty()) throw MetadataError("reports lack the cluster key", offenders);

    std::map<std::string, FitReport> text_groups;
    std::map<double, FitReport> numeric_groups;
    auto merge = [](FitReport& g, const FitReport& r) {
        if (g.per_event.empty() && g.excluded == 0) {
            g.location_id = r.location_id;
            g.fit_floor = r.fit_floor;
        } else if (g.location_id != r.location_id) {
            g.location_id = "*";
        }
        g.per_event.insert(g.per_event.end(), r.per_event.begin(), r.per_event.end());
        g.excluded += r.excluded;
        g.exclusion_reasons.insert(g.exclusion_reasons.end(), r.exclusion_reasons.begin(),
                                   r.exclusion_reasons.end());
    };
    for (const auto& r : reports) {
        if (key == ClusterKey::train_type) {
            auto& g = text_groups[*r.keys.train_type];
            merge(g, r);
            g.keys.train_type = r.keys.train_type;
        } else if (key == ClusterKey::speed) {
            auto& g = numeric_groups[*r.keys.speed_kmh];
            merge(g, r);
            g.keys.speed_kmh = r.keys.speed_kmh;
        } else {
            auto& g = numeric_groups[*r.keys.axle_load_t];
            merge(g, r);
            g.keys.axle_load_t = r.keys.axle_load_t;
        }
    }
    std::vector<FitReport> out;
    for (auto& [_, g] : text_groups) out.push_back(std::move(g));
    for (auto& [_, g] : numeric_groups) out.push_back(std::move(g));
    for (auto& g : out) g.summarize();
    return out;
}

void to_json(nlohmann::json& j, const ClusterKeys& k) {
    j = nlohmann::json::object();
    j["train_type"] = k.train_type ? nlohmann::json(*k.train_type) : nlohmann::json(nullptr);
    j["speed_kmh"] = k.speed_kmh ? nlohmann::json(*k.speed_kmh) : nlohmann::json(nullptr);
    j["axle_load_t"] = k.axle_load_t ? nlohmann::json(*k.axle_load_t) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, ClusterKeys& k) {
    auto get = [&](const char* name) { return j.contains(name) && !j.at(name).is_null(); };
    k.train_type = get("train_type") ? std::optional(j.at("train_type").get<std::string>()) : std::nullopt;
    k.speed_kmh = get("speed_kmh") ? std::optional(j.at("speed_kmh").get<double>()) : std::nullopt;
    k.axle_load_t = get("axle_load_t") ? std::optional(j.at("axle_load_t").get<double>()) : std::nullopt;
}

void to_json(nlohmann::json& j, const FitReport& r) {
    auto events = nlohmann::json::array();
    for (const auto& e : r.per_event) {
        events.push_back({{"event", e.event_index},
                          {"peak_time_s", e.peak_time},
                          {"fit_pct", r.reported_fit(e)},
                          {"raw_fit_pct", e.fit_pct},
                          {"samples", e.measured.size()}});
    }
    j = nlohmann::json{{"location_id", r.location_id},
                       {"events", events},
                       {"n_events", r.per_event.size()},
                       {"mean_fit_pct", r.mean_fit},
                       {"std_fit_pct", r.std_fit},
                       {"excluded", r.excluded},
                       {"exclusion_reasons", r.exclusion_reasons},
                       {"fit_floor_pct", r.fit_floor},
                       {"cluster_keys", r.keys}};
}

void write_fit_csv(std::ostream& out, std::span<const FitReport> reports) {
    out << "location,event,fit_pct,train_type,speed_kmh,axle_load_t\n";
    for (const auto& r : reports) {
        for (const auto& e : r.per_event) {
            out << r.location_id << ',' << e.event_index << ',' << format_sig(r.reported_fit(e)) << ','
                << r.keys.train_type.value_or("") << ','
                << (r.keys.speed_kmh ? format_sig(*r.keys.speed_kmh) : "") << ','
                << (r.keys.axle_load_t ? format_sig(*r.keys.axle_load_t) : "") << '\n';
        }
    }
}

}  // namespace modalid
