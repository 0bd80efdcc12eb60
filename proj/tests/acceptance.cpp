// One PASS/FAIL line per acceptance criterion; exits non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "modalid/commands.hpp"
#include "modalid/compose.hpp"
#include "modalid/era.hpp"
#include "modalid/predict.hpp"
#include "modalid/registry.hpp"
#include "modalid/spectral.hpp"
#include "modalid/synth.hpp"
#include "random_systems.hpp"
#include "reference_modes.hpp"
#include "support.hpp"

using namespace modalid;
namespace fs = std::filesystem;
using nlohmann::json;
using testing::kFs;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... v) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, v...);
    return buf;
}

// ---- CLI plumbing ----

int cli(const std::vector<std::string>& args, std::string* log = nullptr) {
    std::ostringstream out, err;
    const int rc = run_cli(args, out, err);
    if (log) *log = err.str();
    return rc;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
}

json read_json_file(const fs::path& p) { return json::parse(testing::slurp(p)); }

bool synth(const fs::path& dir, const json& cfg, std::vector<std::string> extra = {}) {
    fs::create_directories(dir);
    write_text(dir / "synth.json", cfg.dump());
    std::vector<std::string> args{"synth", (dir / "synth.json").string(), "--track-configs",
                                  default_track_config_path(), "--out-dir", dir.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args) == 0;
}

bool identify(const fs::path& data, const fs::path& out, const std::string& location, const fs::path& registry,
              const std::string& timestamp = "2026-01-01T00:00:00Z") {
    return cli({"identify", (data / "impacts.csv").string(), "--location", location, "--registry",
                registry.string(), "--timestamp", timestamp, "--out-dir", out.string()}) == 0;
}

bool validate(const fs::path& model_dir, const fs::path& data, const fs::path& out) {
    return cli({"validate", (model_dir / "model.json").string(), (data / "passage.csv").string(),
                (data / "manifest.json").string(), "--out-dir", out.string()}) == 0;
}

json with_passage(json cfg, std::optional<double> snr_db) {
    cfg["impacts"] = {{"count", 10}};
    cfg["passage"] = {{"speed_kmh", 160.0}};
    if (snr_db) {
        cfg["impacts"]["snr_db"] = *snr_db;
        cfg["passage"]["snr_db"] = *snr_db;
    }
    return cfg;
}

json location_config(const std::string& location, std::uint64_t seed, std::optional<double> snr_db = std::nullopt) {
    return with_passage({{"location", location}, {"seed", seed}}, snr_db);
}

json track_config(const TrackConfig& t, std::uint64_t seed, std::optional<double> snr_db = std::nullopt) {
    return with_passage({{"track", t}, {"seed", seed}}, snr_db);
}

TrackConfig bundled(const std::string& location) {
    return read_json_file(default_track_config_path()).at(location).get<TrackConfig>();
}

std::map<std::string, std::string> tree_of(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = testing::slurp(e.path());
    }
    return out;
}

// ---- criteria ----

Outcome published_eigenvalues() {
    const double Ts = 1.0 / 20000.0;
    double worst = 0.0;
    std::vector<std::string> off;
    for (const auto& row : testing::reference_modes()) {
        Eigen::MatrixXd A(2, 2);
        A << row.eigenvalue.real(), row.eigenvalue.imag(), -row.eigenvalue.imag(), row.eigenvalue.real();
        const auto m = modal_parameters(A, Ts).modes.at(0);
        const double ef = testing::rel(m.freq_hz, row.freq_hz), ez = testing::rel(m.damping, row.damping);
        worst = std::max({worst, ef, ez});
        if (ef > 0.01 || ez > 0.01) {
            off.push_back(fmt("%s %.1f Hz: got %.2f Hz/%.4f, listed %.2f Hz/%.4f", row.location.c_str(), row.freq_hz,
                              m.freq_hz, m.damping, row.freq_hz, row.damping));
        }
    }
    std::string detail = fmt("%zu/%zu rows within 1%%, worst %.2f%%", testing::reference_modes().size() - off.size(),
                             testing::reference_modes().size(), 100.0 * worst);
    for (const auto& o : off) detail += "; " + o;
    return {off.empty(), detail};
}

Outcome era_recovery() {
    double worst_eig = 0.0, worst_markov = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        const std::size_t order = 2 + k % 5;
        const auto g = testing::random_stable_system(order, 90000 + k);
        const std::size_t n = std::max<std::size_t>(4 * order, 24);
        const auto y = g.sys.markov_parameters(2 * n);
        const auto r = era_realize(build_hankel(y, n), order, g.sys.Ts);
        worst_eig = std::max(worst_eig, testing::eigenvalue_mismatch(testing::eigenvalues_of(r.A), g.eigenvalues));
        const auto m = r.markov_parameters(2 * n);
        double scale = 0.0, err = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            scale = std::max(scale, std::abs(y[i]));
            err = std::max(err, std::abs(m[i] - y[i]));
        }
        worst_markov = std::max(worst_markov, err / scale);
    }
    return {worst_eig <= 1e-8 && worst_markov <= 1e-8,
            fmt("100 systems, worst eigenvalue error %.1e, worst Markov error %.1e", worst_eig, worst_markov)};
}

Outcome pipeline_closure(const fs::path& root) {
    const auto truth = analytic_modes(bundled("CP-A7"));
    // Noiseless identification.
    const auto clean = root / "clean";
    if (!synth(clean, location_config("CP-A7", 1)) || !identify(clean, clean, "CP-A7", root / "reg.json")) {
        return {false, "noiseless pipeline failed"};
    }
    const auto model = read_json_file(clean / "model.json").get<CompositeModel>();
    double worst = 0.0;
    if (model.modes.modes.size() != 2) return {false, "noiseless model lacks a mode"};
    for (std::size_t k = 0; k < 2; ++k) {
        worst = std::max({worst, testing::rel(model.modes.modes[k].freq_hz, truth.modes[k].freq_hz),
                          testing::rel(model.modes.modes[k].damping, truth.modes[k].damping)});
    }
    // 40 dB Monte Carlo.
    std::vector<double> sum_f(2, 0.0);
    std::vector<std::size_t> count(2, 0);
    double passage_fit = 0.0, impact_fit = 0.0;
    std::size_t runs = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto dir = root / ("seed" + std::to_string(seed));
        if (!synth(dir, location_config("CP-A7", seed, 40.0)) || !identify(dir, dir, "CP-A7", root / "reg.json") ||
            !validate(dir, dir, dir)) {
            continue;
        }
        ++runs;
        const auto m = read_json_file(dir / "model.json").get<CompositeModel>();
        for (const auto& md : m.modes.modes) {
            const std::size_t k = md.freq_hz < 200.0 ? 0 : 1;
            sum_f[k] += md.freq_hz;
            ++count[k];
        }
        passage_fit += read_json_file(dir / "fitreport.json").at("report").at("mean_fit_pct").get<double>();
        impact_fit += read_json_file(dir / "validation.json").at("report").at("mean_fit_pct").get<double>();
    }
    if (runs == 0 || count[0] == 0 || count[1] == 0) return {false, "40 dB runs failed"};
    const double e0 = testing::rel(sum_f[0] / count[0], truth.modes[0].freq_hz);
    const double e1 = testing::rel(sum_f[1] / count[1], truth.modes[1].freq_hz);
    passage_fit /= static_cast<double>(runs);
    impact_fit /= static_cast<double>(runs);
    const bool pass = worst <= 0.02 && runs == 20 && e0 <= 0.05 && e1 <= 0.05 && passage_fit >= 70.0;
    return {pass, fmt("noiseless worst %.2f%%; 40 dB: %zu/20 runs, mean freq errors %.2f%% / %.2f%%, "
                      "mean passage fit %.1f%%, held-out impact fit %.1f%%",
                      100.0 * worst, runs, 100.0 * e0, 100.0 * e1, passage_fit, impact_fit)};
}

std::vector<ImpactSegment> linear_pairs(std::size_t count, std::size_t len, double noise_sigma, std::uint64_t seed) {
    std::vector<ImpactSegment> segs;
    for (std::size_t i = 0; i < count; ++i) {
        const auto f = testing::white(len, seed + 2 * i);
        const auto n = testing::white(len, seed + 2 * i + 1, noise_sigma);
        std::vector<double> a(len);
        for (std::size_t j = 0; j < len; ++j) a[j] = 1.5 * f.samples[j] + n.samples[j];
        ImpactSegment s;
        s.force_window = f;
        s.accel_window = TimeSeries(std::move(a), kFs);
        segs.push_back(std::move(s));
    }
    return segs;
}

Outcome coherence_estimator() {
    double min_clean = 1.0;
    const auto clean = averaged_coherence(linear_pairs(10, 4096, 0.0, 7000), WelchOptions{2048, 0.5, WindowKind::hann});
    for (const auto& v : clean.values) min_clean = std::min(min_clean, v.real());
    double worst = 0.0;
    for (double snr : {0.5, 1.0, 4.0}) {
        // The acceleration gain is 1.5, so the noise variance sets the power ratio s.
        const auto segs = linear_pairs(30, 2048, 1.5 / std::sqrt(snr), 8000);
        const auto coh = averaged_coherence(segs, WelchOptions{2048, 0.0, WindowKind::rectangular});
        double mean_c = 0.0;
        for (std::size_t k = 1; k + 1 < coh.size(); ++k) mean_c += coh.values[k].real();
        mean_c /= static_cast<double>(coh.size() - 2);
        worst = std::max(worst, testing::rel(mean_c, snr / (1.0 + snr)));
    }
    return {min_clean >= 0.999 && worst <= 0.10,
            fmt("noiseless minimum %.6f; worst s/(1+s) deviation %.2f%% (s = 0.5, 1, 4; 30 averages)", min_clean,
                100.0 * worst)};
}

Outcome confidence_coverage() {
    const WelchOptions opts{512, 0.5, WindowKind::hann};
    std::size_t inside = 0, total = 0;
    for (std::uint64_t run = 0; run < 500; ++run) {
        const auto s = psd(testing::white(512 * 16, 50000 + run), opts);
        const auto band = psd_confidence(s, welch_degrees_of_freedom(opts, s.n_averages), 0.05);
        for (std::size_t k = 1; k + 1 < s.size(); ++k) {
            ++total;
            if (band.lower.values[k].real() <= 2.0 / kFs && 2.0 / kFs <= band.upper.values[k].real()) ++inside;
        }
    }
    const double cov = static_cast<double>(inside) / static_cast<double>(total);
    return {std::abs(cov - 0.95) <= 0.03, fmt("coverage %.2f%% over 500 runs x %zu bins", 100.0 * cov, total / 500)};
}

Outcome fit_contract() {
    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> u(-1.0, 1.0), len(10.0, 2000.0), scale(-4.0, 4.0);
    double worst_self = 0.0, worst_mean = 0.0, worst_affine = 0.0;
    for (int c = 0; c < 1000; ++c) {
        const auto n = static_cast<std::size_t>(len(rng));
        std::vector<double> x(n), xhat(n);
        // Offsets stay within ten times the signal variation: a larger offset rounds the
        // variation away when a x + b is formed, before any score is computed.
        const double amp = std::pow(10.0, scale(rng)), offset = 10.0 * amp * u(rng);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = offset + amp * u(rng);
            xhat[i] = x[i] + 0.5 * amp * u(rng);
        }
        worst_self = std::max(worst_self, std::abs(fit_score(x, x) - 100.0));
        worst_mean = std::max(worst_mean, std::abs(fit_score(x, std::vector<double>(n, mean(x)))));
        const double a = std::pow(10.0, scale(rng)) * (u(rng) < 0 ? -1.0 : 1.0);
        const double b = 10.0 * std::abs(a) * amp * u(rng);
        std::vector<double> ax(n), axhat(n);
        for (std::size_t i = 0; i < n; ++i) {
            ax[i] = a * x[i] + b;
            axhat[i] = a * xhat[i] + b;
        }
        worst_affine = std::max(worst_affine, std::abs(fit_score(ax, axhat) - fit_score(x, xhat)));
    }
    return {worst_self <= 1e-9 && worst_mean <= 1e-9 && worst_affine <= 1e-9,
            fmt("1000 cases: |fit(x,x)-100| %.1e, |fit(x,mean)| %.1e, affine deviation %.1e", worst_self, worst_mean,
                worst_affine)};
}

Outcome mismatch_and_trend(const fs::path& root) {
    // A model identified on a track whose modes sit 30 percent higher, scored on the original.
    auto shifted = bundled("CP-A7");
    shifted.k_pad *= 1.69;
    shifted.k_ballast *= 1.69;
    shifted.c_pad *= 1.3;
    shifted.c_ballast *= 1.3;
    const auto other = root / "shifted", own = root / "own";
    if (!synth(other, track_config(shifted, 2)) || !identify(other, other, "SHIFTED", root / "reg_mismatch.json") ||
        !synth(own, location_config("CP-A7", 2)) || !validate(other, own, own)) {
        return {false, "mismatch pipeline failed"};
    }
    const double fit = read_json_file(own / "fitreport.json").at("report").at("mean_fit_pct").get<double>();

    // Ballast stiffness reduced 10 percent per step.
    const auto reg = root / "registry.json";
    for (int step = 0; step < 4; ++step) {
        auto t = bundled("CP-A7");
        t.k_ballast *= std::pow(0.9, step);
        const auto dir = root / ("step" + std::to_string(step));
        const std::string ts = fmt("2026-%02d-01T00:00:00Z", step + 1);
        if (!synth(dir, track_config(t, 3)) || !identify(dir, dir, "CP-A7", reg, ts)) {
            return {false, "degradation identification failed"};
        }
    }
    if (cli({"trend", "--location", "CP-A7", "--registry", reg.string(), "--out-dir", root.string()}) != 0) {
        return {false, "trend failed"};
    }
    std::istringstream in(testing::slurp(root / "trend.csv"));
    std::string line;
    std::getline(in, line);
    std::vector<double> first;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::string ts, mode, freq;
        std::getline(ls, ts, ',');
        std::getline(ls, mode, ',');
        std::getline(ls, freq, ',');
        if (mode == "1") first.push_back(std::stod(freq));
    }
    bool decreasing = first.size() == 4;
    for (std::size_t i = 1; i < first.size(); ++i) decreasing = decreasing && first[i] < first[i - 1];
    std::string series;
    for (double f : first) series += fmt(" %.2f", f);
    return {fit < 50.0 && decreasing,
            fmt("30%% shifted model mean fit %.1f%%; first-mode trend (Hz):%s", fit, series.c_str())};
}

Outcome determinism(const fs::path& root) {
    std::vector<std::map<std::string, std::string>> trees;
    for (const char* run : {"a", "b"}) {
        const auto dir = root / run;
        const auto out = dir / "out";
        fs::create_directories(out);
        const bool ok = synth(dir, location_config("CP-A7", 9, 40.0)) &&
                        cli({"coherence", (dir / "impacts.csv").string(), "--out-dir", out.string()}) == 0 &&
                        cli({"identify", (dir / "impacts.csv").string(), "--location", "CP-A7", "--seed", "3",
                             "--registry", (out / "registry.json").string(), "--timestamp", "2026-01-01T00:00:00Z",
                             "--out-dir", out.string()}) == 0 &&
                        validate(out, dir, out) &&
                        cli({"trend", "--location", "CP-A7", "--registry", (out / "registry.json").string(),
                             "--out-dir", out.string()}) == 0;
        if (!ok) return {false, std::string("command failed in run ") + run};
        trees.push_back(tree_of(dir));
    }
    std::size_t differing = 0;
    for (const auto& [name, body] : trees[0]) {
        const auto it = trees[1].find(name);
        if (it == trees[1].end() || it->second != body) ++differing;
    }
    const bool pass = differing == 0 && trees[0].size() == trees[1].size();
    return {pass, fmt("%zu output files over synth, coherence, identify, validate, trend; %zu differ",
                      trees[0].size(), differing)};
}

}  // namespace

int main() {
    const auto root = testing::scratch_dir("acceptance");
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "published eigenvalue consistency", 1.0, published_eigenvalues},
        {2, "ERA exact recovery", 30.0, era_recovery},
        {3, "pipeline closure on synthetic turnout", 120.0, [&] { return pipeline_closure(root / "c3"); }},
        {4, "coherence estimator", 30.0, coherence_estimator},
        {5, "chi-squared CI coverage", 120.0, confidence_coverage},
        {6, "fit-score contract", 5.0, fit_contract},
        {7, "model mismatch and degradation trend", 120.0, [&] { return mismatch_and_trend(root / "c7"); }},
        {8, "CLI determinism", 60.0, [&] { return determinism(root / "c8"); }},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = dt <= c.limit_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::printf("%s criterion %d (%s) [%.2f s of %.0f s]: %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, dt,
                    c.limit_s, o.detail.c_str(), in_time ? "" : " (over time limit)");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
