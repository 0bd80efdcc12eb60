#include "modalid/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "modalid/error.hpp"
#include "modalid/filter.hpp"

namespace modalid {
namespace {

double power_of(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc / static_cast<double>(x.size());
}

std::size_t sample_count(double duration_s, double fs) {
    if (!(duration_s > 0.0)) throw InvalidParameterError("duration must be positive");
    return static_cast<std::size_t>(std::llround(duration_s * fs));
}

}  // namespace

void TrackConfig::validate() const {
    if (!(m_rail > 0.0) || !(m_sleeper > 0.0)) throw InvalidParameterError("masses must be positive");
    if (!(k_pad > 0.0) || !(k_ballast > 0.0)) throw InvalidParameterError("stiffnesses must be positive");
    if (!(c_pad >= 0.0) || !(c_ballast >= 0.0)) throw InvalidParameterError("dampings must be non-negative");
    if (!(sample_rate > 0.0)) throw InvalidParameterError("sample rate must be positive");
}

void AxleSchedule::validate() const {
    if (arrival_times.empty()) throw InvalidParameterError("schedule has no axles");
    if (amplitudes.size() != arrival_times.size()) {
        throw InvalidParameterError("one amplitude per axle required");
    }
    for (std::size_t i = 1; i < arrival_times.size(); ++i) {
        if (!(arrival_times[i] > arrival_times[i - 1])) {
            throw InvalidParameterError("arrival times must be strictly increasing");
        }
    }
}

std::vector<double> DiscreteSystem::simulate(const std::vector<double>& u) const {
    std::vector<double> y(u.size());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(A.rows());
    for (std::size_t k = 0; k < u.size(); ++k) {
        y[k] = C.dot(x) + D * u[k];
        x = A * x + B * u[k];
    }
    return y;
}

ContinuousSystem continuous_system(const TrackConfig& cfg) {
    cfg.validate();
    const double mr = cfg.m_rail, ms = cfg.m_sleeper;
    const double kp = cfg.k_pad, cp = cfg.c_pad, kb = cfg.k_ballast, cb = cfg.c_ballast;
    ContinuousSystem s;
    s.A = Eigen::MatrixXd::Zero(4, 4);
    s.A(0, 2) = 1.0;
    s.A(1, 3) = 1.0;
    s.A(2, 0) = -kp / mr;
    s.A(2, 1) = kp / mr;
    s.A(2, 2) = -cp / mr;
    s.A(2, 3) = cp / mr;
    s.A(3, 0) = kp / ms;
    s.A(3, 1) = -(kp + kb) / ms;
    s.A(3, 2) = cp / ms;
    s.A(3, 3) = -(cp + cb) / ms;
    s.B = Eigen::VectorXd::Zero(4);
    s.B(2) = 1.0 / mr;
    s.C = s.A.row(2);
    s.D = 1.0 / mr;
    s.sample_rate = cfg.sample_rate;
    return s;
}

ContinuousSystem continuous_system(const OscillatorConfig& cfg) {
    if (!(cfg.freq_hz > 0.0) || !(cfg.mass > 0.0) || !(cfg.damping >= 0.0) || !(cfg.sample_rate > 0.0)) {
        throw InvalidParameterError("oscillator needs positive frequency, mass and rate");
    }
    const double w = 2.0 * std::numbers::pi * cfg.freq_hz;
    ContinuousSystem s;
    s.A = Eigen::MatrixXd::Zero(2, 2);
    s.A(0, 1) = 1.0;
    s.A(1, 0) = -w * w;
    s.A(1, 1) = -2.0 * cfg.damping * w;
    s.B = Eigen::VectorXd::Zero(2);
    s.B(1) = 1.0 / cfg.mass;
    s.C = s.A.row(1);
    s.D = 1.0 / cfg.mass;
    s.sample_rate = cfg.sample_rate;
    return s;
}

DiscreteSystem discretize(const ContinuousSystem& sys) {
    const Eigen::Index n = sys.A.rows();
    const double Ts = 1.0 / sys.sample_rate;
    // Positions and velocities differ in scale by about omega; the exponential is taken in
    // balanced coordinates, where its norm is of order omega Ts and needs no squaring.
    const Eigen::VectorXd s = balancing_scale(sys.A);
    const Eigen::VectorXd inv = s.cwiseInverse();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = inv.asDiagonal() * sys.A * s.asDiagonal() * Ts;
    aug.topRightCorner(n, 1) = inv.asDiagonal() * sys.B * Ts;
    const Eigen::MatrixXd e = aug.exp();
    DiscreteSystem d;
    d.A = s.asDiagonal() * e.topLeftCorner(n, n) * inv.asDiagonal();
    d.B = s.asDiagonal() * e.topRightCorner(n, 1);
    d.C = sys.C;
    d.D = sys.D;
    d.Ts = Ts;
    return d;
}

ModalParameters analytic_modes(const ContinuousSystem& sys) {
    const double Ts = 1.0 / sys.sample_rate;
    const auto ev = balanced_eigenvalues(sys.A);
    ModalParameters out;
    out.Ts = Ts;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const std::complex<double> s = ev(i);
        if (s.imag() < 0.0) continue;
        Mode m;
        const double wn = std::abs(s);
        m.freq_hz = wn / (2.0 * std::numbers::pi);
        m.damping = wn > 0.0 ? -s.real() / wn : 0.0;
        m.eigenvalue = std::exp(s * Ts);
        m.overdamped = s.imag() == 0.0;
        out.modes.push_back(m);
    }
    std::stable_sort(out.modes.begin(), out.modes.end(),
                     [](const Mode& a, const Mode& b) { return a.freq_hz < b.freq_hz; });
    return out;
}

ModalParameters analytic_modes(const TrackConfig& cfg) { return analytic_modes(continuous_system(cfg)); }

ImpactSegment simulate_impulse(const ContinuousSystem& sys, double duration_s, double amplitude) {
    const std::size_t n = sample_count(duration_s, sys.sample_rate);
    std::vector<double> u(n, 0.0);
    if (n > 0) u[0] = amplitude;
    const auto y = discretize(sys).simulate(u);
    ImpactSegment seg;
    seg.force_window = TimeSeries(std::move(u), sys.sample_rate, "force_n");
    seg.accel_window = TimeSeries(y, sys.sample_rate, "accel");
    seg.event_index = 0;
    seg.peak_time = 0.0;
    return seg;
}

ImpactSegment simulate_impulse(const TrackConfig& cfg, double duration_s, double amplitude) {
    return simulate_impulse(continuous_system(cfg), duration_s, amplitude);
}

void add_white_noise(std::vector<double>& x, double snr_db, std::uint64_t seed) {
    const double sigma = std::sqrt(power_of(x) * std::pow(10.0, -snr_db / 10.0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    for (double& v : x) v += dist(rng);
}

TimeSeries simulate_passage(const ContinuousSystem& sys, const AxleSchedule& sched, double duration_s,
                            double amplitude, const NoiseOptions& noise) {
    sched.validate();
    const std::size_t n = sample_count(duration_s, sys.sample_rate);
    std::vector<double> u(n, 0.0);
    for (std::size_t i = 0; i < sched.arrival_times.size(); ++i) {
        const auto k = std::llround(sched.arrival_times[i] * sys.sample_rate);
        if (k < 0 || static_cast<std::size_t>(k) >= n) {
            throw InvalidParameterError("axle arrival outside the simulated duration");
        }
        u[static_cast<std::size_t>(k)] += amplitude * sched.amplitudes[i];
    }
    auto y = discretize(sys).simulate(u);
    if (noise.snr_db) add_white_noise(y, *noise.snr_db, noise.seed);
    return TimeSeries(std::move(y), sys.sample_rate, "accel");
}

TimeSeries simulate_passage(const TrackConfig& cfg, const AxleSchedule& sched, double duration_s,
                            double amplitude, const NoiseOptions& noise) {
    return simulate_passage(continuous_system(cfg), sched, duration_s, amplitude, noise);
}

AxleSchedule ic3_like_schedule(double speed_kmh, double first_arrival_s, double axle_load_t,
                               double bogie_axle_m, double bogie_centre_m) {
    if (!(speed_kmh > 0.0)) throw InvalidParameterError("speed must be positive");
    const double v = speed_kmh / 3.6;
    AxleSchedule s;
    for (double x : {0.0, bogie_axle_m, bogie_centre_m, bogie_centre_m + bogie_axle_m}) {
        s.arrival_times.push_back(first_arrival_s + x / v);
        s.amplitudes.push_back(1.0);
    }
    s.speed_kmh = speed_kmh;
    s.train_type = "IC3";
    s.axle_load_t = axle_load_t;
    return s;
}

Record simulate_impact_record(const ContinuousSystem& sys, const ImpactRecordOptions& opts) {
    if (opts.impacts == 0) throw InvalidParameterError("impact count must be positive");
    if (!(opts.spacing_s > 0.0) || !(opts.first_s >= 0.0)) {
        throw InvalidParameterError("impact spacing must be positive");
    }
    const double fs = sys.sample_rate;
    const double duration = opts.first_s + static_cast<double>(opts.impacts) * opts.spacing_s;
    const std::size_t n = sample_count(duration, fs);
    std::vector<double> u(n, 0.0);
    std::mt19937_64 rng(opts.noise.seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    for (std::size_t i = 0; i < opts.impacts; ++i) {
        const auto k = static_cast<std::size_t>(
            std::llround((opts.first_s + static_cast<double>(i) * opts.spacing_s) * fs));
        u[k] = opts.amplitude * (1.0 + opts.amplitude_jitter * jitter(rng));
    }
    auto y = discretize(sys).simulate(u);
    const double clean_power = power_of(y);
    auto f = u;
    if (opts.noise.snr_db) {
        add_white_noise(f, *opts.noise.snr_db, opts.noise.seed * 2 + 1);
        add_white_noise(y, *opts.noise.snr_db, opts.noise.seed * 2 + 2);
    }
    if (opts.high_band_noise_ratio) {
        std::vector<double> w(n);
        std::mt19937_64 nrng(opts.noise.seed * 2 + 3);
        std::normal_distribution<double> dist(0.0, 1.0);
        for (double& v : w) v = dist(nrng);
        const auto band = apply_filter(TimeSeries(std::move(w), fs), FilterSpec::bandpass(300.0, 900.0));
        const double scale = std::sqrt(*opts.high_band_noise_ratio * clean_power / power_of(band.samples));
        for (std::size_t i = 0; i < n; ++i) y[i] += scale * band.samples[i];
    }
    Record rec;
    rec.force = TimeSeries(std::move(f), fs, "force_n");
    rec.accel = TimeSeries(std::move(y), fs, "accel");
    return rec;
}

Record simulate_impact_record(const TrackConfig& cfg, const ImpactRecordOptions& opts) {
    return simulate_impact_record(continuous_system(cfg), opts);
}

void to_json(nlohmann::json& j, const TrackConfig& cfg) {
    j = nlohmann::json{{"m_rail", cfg.m_rail},       {"m_sleeper", cfg.m_sleeper},
                       {"k_pad", cfg.k_pad},         {"c_pad", cfg.c_pad},
                       {"k_ballast", cfg.k_ballast}, {"c_ballast", cfg.c_ballast},
                       {"sample_rate", cfg.sample_rate}};
}

void from_json(const nlohmann::json& j, TrackConfig& cfg) {
    cfg.m_rail = j.at("m_rail").get<double>();
    cfg.m_sleeper = j.at("m_sleeper").get<double>();
    cfg.k_pad = j.at("k_pad").get<double>();
    cfg.c_pad = j.at("c_pad").get<double>();
    cfg.k_ballast = j.at("k_ballast").get<double>();
    cfg.c_ballast = j.at("c_ballast").get<double>();
    cfg.sample_rate = j.value("sample_rate", 20000.0);
    cfg.validate();
}

void to_json(nlohmann::json& j, const AxleSchedule& s) {
    j = nlohmann::json{{"arrival_times", s.arrival_times},
                       {"amplitudes", s.amplitudes},
                       {"speed_kmh", s.speed_kmh},
                       {"train_type", s.train_type},
                       {"axle_load_t", s.axle_load_t}};
}

void from_json(const nlohmann::json& j, AxleSchedule& s) {
    s.arrival_times = j.at("arrival_times").get<std::vector<double>>();
    s.amplitudes = j.contains("amplitudes") ? j.at("amplitudes").get<std::vector<double>>()
                                            : std::vector<double>(s.arrival_times.size(), 1.0);
    s.speed_kmh = j.value("speed_kmh", 0.0);
    s.train_type = j.value("train_type", std::string{});
    s.axle_load_t = j.value("axle_load_t", 0.0);
    s.validate();
}

}  // namespace modalid
