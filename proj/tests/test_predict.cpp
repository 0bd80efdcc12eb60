#include <numbers>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "modalid/compose.hpp"
#include "modalid/error.hpp"
#include "modalid/filter.hpp"
#include "modalid/predict.hpp"
#include "modalid/segmentation.hpp"
#include "modalid/synth.hpp"
#include "random_systems.hpp"
#include "support.hpp"

using namespace modalid;
using testing::kFs;

namespace {

std::vector<ImpactSegment> impacts(const TrackConfig& cfg, std::optional<double> snr_db = std::nullopt,
                                   std::uint64_t seed = 0) {
    ImpactRecordOptions opts;
    opts.noise = NoiseOptions{snr_db, seed};
    const auto rec = simulate_impact_record(cfg, opts);
    return segment_impacts(*rec.force, rec.accel);
}

const CompositeModel& cp_a7_model() {
    static const CompositeModel m =
        identify_location(impacts(testing::cp_a7()), IdentificationConfig{}, std::nullopt, "CP-A7").model;
    return m;
}

EventPrediction scored(double fit) {
    EventPrediction e;
    e.fit_pct = fit;
    return e;
}

FitReport report(std::string location, std::vector<double> fits, ClusterKeys keys = {}) {
    FitReport r;
    r.location_id = std::move(location);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        r.per_event.push_back(scored(fits[i]));
        r.per_event.back().event_index = i;
    }
    r.keys = std::move(keys);
    r.summarize();
    return r;
}

}  // namespace

TEST_CASE("exact initial state recovery from noiseless output") {
    for (std::size_t order : {2, 3, 4, 6}) {
        CAPTURE(order);
        const auto g = testing::random_stable_system(order, 11 + order);
        Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(order), -1.0, 2.0);
        const auto y = zero_input_response(g.sys.A, g.sys.c, x0, 300);
        const auto est = estimate_initial_state(g.sys.A, g.sys.c, y, 200);
        CHECK(est.horizon == 200);
        CHECK((est.x0 - x0).norm() <= 1e-9 * x0.norm());
        CHECK(est.residual_norm <= 1e-9);
    }
}

TEST_CASE("initial state is within 2 percent under 1 percent output noise") {
    const auto& m = cp_a7_model();
    Eigen::VectorXd x0(4);
    x0 << 1.0, -0.5, 0.3, 0.8;
    const auto clean = zero_input_response(m.A, m.C, x0, 200);
    const double sigma = 0.01 * testing::rms_of(clean);
    double total = 0.0;
    for (std::uint64_t draw = 0; draw < 100; ++draw) {
        auto y = testing::white(200, 1000 + draw, sigma).samples;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += clean[i];
        total += (estimate_initial_state(m.A, m.C, y, 200).x0 - x0).norm() / x0.norm();
    }
    CHECK(total / 100.0 <= 0.02);
}

TEST_CASE("zero output gives a zero initial state") {
    const auto& m = cp_a7_model();
    const std::vector<double> y(400, 0.0);
    const auto est = estimate_initial_state(m.A, m.C, y, 400);
    CHECK(est.x0.norm() == 0.0);
    CHECK(est.residual_norm == 0.0);
}

TEST_CASE("residual norm matches the reconstructed output") {
    const auto g = testing::random_stable_system(4, 3);
    const auto y = testing::white(150, 4).samples;
    const auto est = estimate_initial_state(g.sys.A, g.sys.c, y, 150);
    const auto yhat = zero_input_response(g.sys.A, g.sys.c, est.x0, 150);
    double r = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) r += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    CHECK(est.residual_norm == doctest::Approx(std::sqrt(r)).epsilon(1e-9));
}

TEST_CASE("initial state argument checks") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 4);
    A.topLeftCorner(2, 2) << 0.9, 0.1, -0.1, 0.9;
    A.bottomRightCorner(2, 2) << 0.8, 0.3, -0.3, 0.8;
    Eigen::RowVectorXd C(4);
    C << 1.0, 0.0, 0.0, 0.0;
    const std::vector<double> y(100, 1.0);
    CHECK_THROWS_AS(estimate_initial_state(A, C, y, 50), UnobservableModelError);
    C << 1.0, 0.0, 1.0, 0.0;
    CHECK_NOTHROW(estimate_initial_state(A, C, y, 50));
    CHECK_THROWS_AS(estimate_initial_state(A, C, y, 3), InvalidParameterError);
    CHECK_THROWS_AS(estimate_initial_state(A, C, y, 101), TooShortError);
}

TEST_CASE("undamped rotation keeps its amplitude over 1000 samples") {
    const double theta = 2.0 * std::numbers::pi * 163.0 / kFs;
    Eigen::MatrixXd A(2, 2);
    A << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
    Eigen::RowVectorXd C(2);
    C << 1.0, 0.0;
    Eigen::VectorXd x0(2);
    x0 << 0.6, 0.8;
    const auto y = zero_input_response(A, C, x0, 1000);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double t = theta * static_cast<double>(i);
        CHECK(std::abs(y[i] - (0.6 * std::cos(t) + 0.8 * std::sin(t))) <= 1e-9);
    }
}

TEST_CASE("composite model continues a held-out impulse response") {
    const auto& m = cp_a7_model();
    const auto seg = simulate_impulse(testing::cp_a7(), 0.1, 1000.0);
    const auto pre = preprocess_impact(seg.accel_window, IdentificationConfig{});
    const std::size_t delay = 40, horizon = 400, span = 1000;  // 2 ms, then 0.05 s
    const auto measured = pre.slice(delay, delay + horizon + span);
    const auto est = estimate_initial_state(m, measured, horizon);
    const auto pred = zero_input_response(m, est.x0, measured.size());
    const double err = testing::rms_diff(measured.samples, pred.samples, horizon, horizon + span);
    CHECK(err <= 0.05 * testing::rms_of(measured.samples, horizon, horizon + span));
}

TEST_CASE("fit score contract") {
    const auto y = testing::sine(163.0, 500, 2.0).samples;
    CHECK(fit_score(y, y) == 100.0);
    const double mu = mean(y);
    CHECK(std::abs(fit_score(y, std::vector<double>(y.size(), mu))) <= 1e-12);
    auto flipped = y;
    for (double& v : flipped) v = 2.0 * mu - v;
    CHECK(fit_score(y, flipped) == doctest::Approx(-100.0));
    const auto noise = testing::white(500, 8, 0.1).samples;
    std::vector<double> yhat(y.size());
    double e2 = 0.0, d2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        yhat[i] = y[i] + noise[i];
        e2 += noise[i] * noise[i];
        d2 += (y[i] - mu) * (y[i] - mu);
    }
    const double fit = fit_score(y, yhat);
    CHECK(fit == doctest::Approx(100.0 * (1.0 - std::sqrt(e2 / d2))).epsilon(1e-12));
    CHECK(fit < 100.0);
    // Invariant under a common affine map of both signals.
    std::vector<double> ay(y.size()), ayhat(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        ay[i] = -3.0 * y[i] + 7.0;
        ayhat[i] = -3.0 * yhat[i] + 7.0;
    }
    CHECK(fit_score(ay, ayhat) == doctest::Approx(fit).epsilon(1e-10));
}

TEST_CASE("fit score errors") {
    const std::vector<double> flat(100, 3.0), other(100, 1.0), shorter(99, 1.0);
    CHECK_THROWS_AS(fit_score(flat, other), UndefinedScoreError);
    CHECK_THROWS_AS(fit_score(other, shorter), AlignmentError);
    CHECK_THROWS_AS(fit_score(std::vector<double>{1.0}, std::vector<double>{1.0}), TooShortError);
}

TEST_CASE("report summary uses floored fits and the sample deviation") {
    const auto r = report("X", {-500.0, 50.0, 100.0});
    CHECK(r.reported_fit(r.per_event[0]) == -100.0);
    CHECK(r.mean_fit == doctest::Approx(50.0 / 3.0));
    const double sd = std::sqrt(((-100.0 - 50.0 / 3.0) * (-100.0 - 50.0 / 3.0) + (50.0 - 50.0 / 3.0) * (50.0 - 50.0 / 3.0) +
                                 (100.0 - 50.0 / 3.0) * (100.0 - 50.0 / 3.0)) / 2.0);
    CHECK(r.std_fit == doctest::Approx(sd));
    CHECK(report("Y", {80.0}).std_fit == 0.0);
}

TEST_CASE("validation of held-out noiseless impacts scores at least 95 percent") {
    const IdentificationConfig cfg;
    auto segs = impacts(testing::cp_a7());
    for (auto& s : segs) s.accel_window = preprocess_impact(s.accel_window, cfg);
    const auto rep = validate_events(cp_a7_model(), segs);
    CHECK(rep.location_id == "CP-A7");
    CHECK(rep.excluded == 0);
    REQUIRE(rep.per_event.size() == segs.size());
    for (const auto& e : rep.per_event) CHECK(e.fit_pct >= 95.0);
    CHECK(rep.mean_fit >= 95.0);
    CHECK(rep.per_event[0].measured.size() == rep.per_event[0].predicted.size());
}

TEST_CASE("40 dB train passages score a mean fit between 50 and 95 percent with spread") {
    std::vector<double> fits;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto p = simulate_passage(testing::cp_a7(), ic3_like_schedule(160.0), 1.0, 1000.0, NoiseOptions{40.0, seed});
        const auto events = detect_wheel_events(apply_filter(p, FilterSpec::bandpass(80.0, 800.0)));
        const auto rep = validate_events(cp_a7_model(), events);
        for (const auto& e : rep.per_event) fits.push_back(rep.reported_fit(e));
    }
    REQUIRE(fits.size() >= 2);
    FitReport all;
    for (double f : fits) all.per_event.push_back(scored(f));
    all.summarize();
    CAPTURE(all.mean_fit);
    CHECK(all.mean_fit > 50.0);
    CHECK(all.mean_fit < 95.0);
    CHECK(all.std_fit > 0.0);
}

TEST_CASE("validation exclusions") {
    CHECK_THROWS_AS(validate_events(cp_a7_model(), std::span<const ImpactSegment>{}), InvalidParameterError);
    auto segs = impacts(testing::cp_a7());
    segs.resize(3);
    segs[1].accel_window = TimeSeries(std::vector<double>(20, 0.0), kFs);
    const auto rep = validate_events(cp_a7_model(), segs);
    CHECK(rep.per_event.size() == 2);
    CHECK(rep.excluded == 1);
    REQUIRE(rep.exclusion_reasons.size() == 1);
    CHECK(rep.exclusion_reasons[0].find("event") == 0);
    for (auto& s : segs) s.accel_window = TimeSeries(std::vector<double>(3000, 1.0), 10000.0);
    CHECK_THROWS_AS(validate_events(cp_a7_model(), segs), Error);
}

TEST_CASE("clustered report groups by key in ascending order") {
    const std::vector<FitReport> one{report("A", {90.0, 80.0}, {"IC3", 160.0, 10.0})};
    const auto single = clustered_report(one, ClusterKey::train_type);
    REQUIRE(single.size() == 1);
    CHECK(single[0].mean_fit == doctest::Approx(85.0));
    CHECK(single[0].location_id == "A");

    const std::vector<FitReport> many{report("A", {90.0}, {"IC3", 160.0, 10.0}),
                                      report("B", {70.0, 60.0}, {"IC3", 120.0, 10.0}),
                                      report("A", {80.0}, {"ME", 160.0, 20.0})};
    const auto speeds = clustered_report(many, ClusterKey::speed);
    REQUIRE(speeds.size() == 2);
    CHECK(*speeds[0].keys.speed_kmh == 120.0);
    CHECK(speeds[0].mean_fit == doctest::Approx(65.0));
    CHECK(*speeds[1].keys.speed_kmh == 160.0);
    CHECK(speeds[1].per_event.size() == 2);
    CHECK(speeds[1].mean_fit == doctest::Approx(85.0));
    CHECK(speeds[1].location_id == "A");
    const auto loads = clustered_report(many, ClusterKey::axle_load);
    REQUIRE(loads.size() == 2);
    CHECK(loads[0].location_id == "*");
    CHECK(loads[0].per_event.size() == 3);
}

TEST_CASE("clustered report names every report lacking the key") {
    const std::vector<FitReport> reports{report("A", {90.0}, {"IC3", std::nullopt, 10.0}),
                                         report("B", {70.0}, {"IC3", 120.0, 10.0}),
                                         report("C", {80.0})};
    try {
        clustered_report(reports, ClusterKey::speed);
        FAIL("missing keys must be reported");
    } catch (const MetadataError& e) {
        REQUIRE(e.offenders().size() == 2);
        CHECK(e.offenders()[0].find("A") != std::string::npos);
        CHECK(e.offenders()[1].find("C") != std::string::npos);
    }
}

TEST_CASE("fit report JSON and CSV") {
    const auto r = report("CP-A7", {-250.0, 90.5}, {"IC3", 160.0, std::nullopt});
    const nlohmann::json j = r;
    CHECK(j.at("location_id") == "CP-A7");
    CHECK(j.at("n_events") == 2);
    CHECK(j.at("events")[0].at("fit_pct") == -100.0);
    CHECK(j.at("events")[0].at("raw_fit_pct") == -250.0);
    CHECK(j.at("fit_floor_pct") == -100.0);
    CHECK(j.at("cluster_keys").at("train_type") == "IC3");
    const auto keys = j.at("cluster_keys").get<ClusterKeys>();
    CHECK(keys.speed_kmh == 160.0);
    CHECK_FALSE(keys.axle_load_t.has_value());

    std::ostringstream out;
    const std::vector<FitReport> reports{r};
    write_fit_csv(out, reports);
    std::istringstream in(out.str());
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "location,event,fit_pct,train_type,speed_kmh,axle_load_t");
    CHECK(lines[1].rfind("CP-A7,0,-100,IC3,160,", 0) == 0);
}
