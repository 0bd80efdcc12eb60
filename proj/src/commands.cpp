#include "modalid/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "modalid/compose.hpp"
#include "modalid/csv_io.hpp"
#include "modalid/error.hpp"
#include "modalid/filter.hpp"
#include "modalid/predict.hpp"
#include "modalid/registry.hpp"
#include "modalid/segmentation.hpp"
#include "modalid/spectral.hpp"
#include "modalid/synth.hpp"

#ifndef MODALID_TRACK_CONFIGS
#define MODALID_TRACK_CONFIGS "track_configs.json"
#endif

namespace modalid {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr FrequencyInterval kPassageBand{80.0, 800.0};

/// Exit code for a failure that is not reported through a specific branch.
int guarded(std::ostream& log, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ParseError& e) {
        log << "error: " << e.what() << '\n';
        return kExitParse;
    } catch (const json::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitParse;
    } catch (const IdentificationFailedError& e) {
        log << "error: " << e.what() << '\n';
        for (const auto& d : e.diagnostics()) log << "  " << d << '\n';
        return kExitIdentification;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

fs::path prepare_dir(const std::string& dir) {
    fs::path p(dir.empty() ? "." : dir);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    body(out);
    out.flush();
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) {
    write_file(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'", 0);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what(), 0);
    }
}

double parse_number(const std::string& text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw InvalidParameterError("invalid number '" + text + "'");
    }
    return v;
}

FrequencyInterval parse_band(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InvalidParameterError("band '" + text + "' must be lo:hi");
    return {parse_number(text.substr(0, colon)), parse_number(text.substr(colon + 1))};
}

/// Impulse windows without tapering: the force sits at the first sample, so one rectangular
/// periodogram per impact.
WelchOptions impact_welch(std::span<const ImpactSegment> segments) {
    std::size_t len = segments.front().accel_window.size();
    for (const auto& s : segments) len = std::min(len, s.accel_window.size());
    WelchOptions o;
    o.seg_len = len;
    o.overlap_frac = 0.0;
    o.window = WindowKind::rectangular;
    return o;
}

struct ImpactData {
    Record record;
    std::vector<ImpactSegment> segments;
};

/// Reads an impact record and segments it; the returned code is non-zero when the record
/// does not hold at least two impacts.
int load_impacts(const std::string& path, std::optional<double> rate, ImpactData& out, std::ostream& log) {
    out.record = read_record_csv(path, rate);
    if (!out.record.force) throw ParseError("impact record '" + path + "' has no force_n column", 1);
    out.segments = segment_impacts(*out.record.force, out.record.accel);
    if (out.segments.size() < 2) {
        log << "error: found " << out.segments.size() << " impact(s), at least two are needed\n";
        return kExitSingleImpact;
    }
    return kExitOk;
}

void write_coherence_csv(std::ostream& out, const Spectrum& coh) {
    out << "freq_hz,coherence\n";
    for (std::size_t k = 0; k < coh.size(); ++k) {
        out << format_sig(coh.freqs[k]) << ',' << format_sig(coh.values[k].real()) << '\n';
    }
}

void write_receptance_csv(std::ostream& out, const Spectrum& h) {
    out << "freq_hz,magnitude_m_per_n,phase_rad,valid\n";
    for (std::size_t k = 0; k < h.size(); ++k) {
        out << format_sig(h.freqs[k]) << ',' << format_sig(std::abs(h.values[k])) << ','
            << format_sig(std::arg(h.values[k])) << ',' << (h.is_valid(k) ? 1 : 0) << '\n';
    }
}

void write_modes_csv(std::ostream& out, const CompositeModel& m) {
    out << "mode,band_low_hz,band_high_hz,freq_hz,freq_std_hz,damping,damping_std\n";
    std::size_t idx = 0;
    for (const auto& band : m.bands) {
        for (const auto& md : band.modes.modes) {
            out << ++idx << ',' << format_sig(band.band.low_hz) << ',' << format_sig(band.band.high_hz) << ','
                << format_sig(md.freq_hz) << ',' << (md.freq_std ? format_sig(*md.freq_std) : "") << ','
                << format_sig(md.damping) << ',' << (md.damping_std ? format_sig(*md.damping_std) : "") << '\n';
        }
    }
}

std::size_t horizon_samples(double horizon_ms, double fs) {
    if (!(horizon_ms > 0.0)) throw InvalidParameterError("horizon must be positive");
    return static_cast<std::size_t>(std::llround(horizon_ms * 1e-3 * fs));
}

IdentificationConfig resolve_config(const IdentifyArgs& args) {
    IdentificationConfig cfg;
    if (args.config_path) cfg = read_json(*args.config_path).get<IdentificationConfig>();
    if (args.split_hz) {
        cfg.split_hz = *args.split_hz;
        cfg.low_band.high_hz = *args.split_hz;
        cfg.high_band.low_hz = *args.split_hz;
    }
    if (args.lowpass_hz) {
        cfg.preprocess_lowpass_hz = *args.lowpass_hz;
        cfg.high_band.high_hz = *args.lowpass_hz;
    }
    if (!args.bands.empty()) {
        if (args.bands.size() != 2) throw ConfigurationError("--band must be given exactly twice (low, high)");
        cfg.low_band = parse_band(args.bands[0]);
        cfg.high_band = parse_band(args.bands[1]);
        if (!args.split_hz) cfg.split_hz = cfg.low_band.high_hz;
    }
    if (args.coherence_threshold) cfg.coherence_threshold = *args.coherence_threshold;
    if (args.seed) cfg.seed = *args.seed;
    cfg.validate();
    return cfg;
}

ClusterKeys read_manifest(const std::string& path) { return read_json(path).get<ClusterKeys>(); }

json clusters_of(const FitReport& rep) {
    json out = json::object();
    const std::vector<FitReport> one{rep};
    if (rep.keys.train_type) out["train_type"] = clustered_report(one, ClusterKey::train_type);
    if (rep.keys.speed_kmh) out["speed"] = clustered_report(one, ClusterKey::speed);
    if (rep.keys.axle_load_t) out["axle_load"] = clustered_report(one, ClusterKey::axle_load);
    return out;
}

TrackConfig resolve_track(const json& cfg, const SynthArgs& args) {
    if (cfg.contains("track")) return cfg.at("track").get<TrackConfig>();
    if (!cfg.contains("location")) throw ParseError("synth config needs \"track\" or \"location\"", 0);
    const auto name = cfg.at("location").get<std::string>();
    const auto table = read_json(args.track_configs.value_or(default_track_config_path()));
    if (!table.contains(name)) throw ParseError("no bundled track parameters for '" + name + "'", 0);
    return table.at(name).get<TrackConfig>();
}

}  // namespace

std::string default_track_config_path() { return MODALID_TRACK_CONFIGS; }

int cmd_coherence(const CoherenceArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        ImpactData data;
        if (const int rc = load_impacts(args.input, args.sample_rate, data, log); rc != kExitOk) return rc;
        const auto opts = impact_welch(data.segments);
        const auto coh = averaged_coherence(data.segments, opts);
        const auto band = valid_band(coh, args.coherence_threshold);
        const auto h = receptance(data.segments, opts);
        const auto peaks = pick_resonances(h, kPassageBand.low_hz, kPassageBand.high_hz, 2);

        const auto dir = prepare_dir(args.out_dir);
        write_file(dir / "coherence.csv", [&](std::ostream& o) { write_coherence_csv(o, coh); });
        json vb = band;
        vb["impacts"] = data.segments.size();
        write_json(dir / "validband.json", vb);
        write_file(dir / "receptance.csv", [&](std::ostream& o) { write_receptance_csv(o, h); });
        json res = json::array();
        for (const auto& p : peaks.peaks) res.push_back({{"freq_hz", p.freq_hz}, {"magnitude", p.magnitude}});
        write_json(dir / "resonances.json", {{"peaks", res}, {"incomplete", peaks.incomplete}});
        if (peaks.incomplete) log << "warning: fewer than two receptance peaks qualified\n";
        return static_cast<int>(kExitOk);
    });
}

int cmd_identify(const IdentifyArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        if (args.location.empty()) {
            log << "error: --location is required\n";
            return static_cast<int>(kExitUsage);
        }
        IdentificationConfig cfg;
        try {
            cfg = resolve_config(args);
        } catch (const ConfigurationError& e) {
            log << "error: " << e.what() << '\n';
            return static_cast<int>(kExitUsage);
        } catch (const InvalidParameterError& e) {
            log << "error: " << e.what() << '\n';
            return static_cast<int>(kExitUsage);
        }
        ImpactData data;
        if (const int rc = load_impacts(args.input, args.sample_rate, data, log); rc != kExitOk) return rc;
        const double fs = data.record.accel.sample_rate;

        const auto coh = averaged_coherence(data.segments, impact_welch(data.segments));
        const auto gate = valid_band(coh, cfg.coherence_threshold);
        const auto [id_idx, val_idx] = split_indices(data.segments.size(), cfg.identification_fraction, cfg.seed);
        std::vector<ImpactSegment> id_set, val_set;
        for (auto i : id_idx) id_set.push_back(data.segments[i]);
        for (auto i : val_idx) {
            auto s = data.segments[i];
            s.accel_window = preprocess_impact(s.accel_window, cfg);
            val_set.push_back(std::move(s));
        }

        const auto ident = identify_location(id_set, cfg, gate, args.location);
        for (const auto& w : ident.warnings) log << "warning: " << w << '\n';
        const auto& model = ident.model;

        json validation = nullptr;
        if (!val_set.empty()) {
            PredictionOptions po;
            po.horizon = std::max(horizon_samples(args.horizon_ms, fs), model.order());
            validation = validate_events(model, val_set, po);
        }

        const auto dir = prepare_dir(args.out_dir);
        write_json(dir / "model.json", model);
        write_file(dir / "modes.csv", [&](std::ostream& o) { write_modes_csv(o, model); });
        write_json(dir / "validation.json",
                   {{"identification_events", id_idx}, {"validation_events", val_idx}, {"report", validation}});
        if (!args.no_registry) {
            ModelRegistry reg(args.registry.value_or(default_registry_path()));
            reg.append(args.location, make_entry(model, cfg, args.timestamp.value_or(utc_timestamp())));
        }
        return static_cast<int>(kExitOk);
    });
}

int cmd_validate(const ValidateArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        const auto model = read_json(args.model).get<CompositeModel>();
        const auto rec = read_record_csv(args.passage, args.sample_rate);
        const double fs = rec.accel.sample_rate;
        if (std::abs(fs * model.Ts - 1.0) > 1e-9) {
            log << "error: passage sampled at " << format_sig(fs) << " Hz, model at "
                << format_sig(model.sample_rate()) << " Hz\n";
            return static_cast<int>(kExitRateMismatch);
        }
        const double upper = std::min(kPassageBand.high_hz, 0.45 * fs);
        const auto filtered = apply_filter(rec.accel, FilterSpec::bandpass(kPassageBand.low_hz, upper));
        const auto events = detect_wheel_events(filtered);
        if (events.empty()) throw Error("no wheel events detected in '" + args.passage + "'");

        PredictionOptions po;
        po.horizon = std::max(horizon_samples(args.horizon_ms, fs), model.order());
        auto rep = validate_events(model, events, po);
        if (args.manifest) {
            rep.keys = read_manifest(*args.manifest);
        } else {
            log << "warning: no manifest, summary written without clusters\n";
        }
        for (const auto& r : rep.exclusion_reasons) log << "warning: excluded " << r << '\n';

        const auto dir = prepare_dir(args.out_dir);
        write_json(dir / "fitreport.json",
                   {{"report", rep}, {"clusters", args.manifest ? clusters_of(rep) : json(nullptr)}});
        const std::vector<FitReport> reps{rep};
        write_file(dir / "fit.csv", [&](std::ostream& o) { write_fit_csv(o, reps); });
        return static_cast<int>(kExitOk);
    });
}

int cmd_synth(const SynthArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        TrackConfig track;
        ImpactRecordOptions io;
        std::optional<AxleSchedule> sched;
        double passage_duration = 1.0, passage_amplitude = 1000.0;
        NoiseOptions passage_noise;
        try {
            const auto cfg = read_json(args.config);
            track = resolve_track(cfg, args);
            const std::uint64_t seed = args.seed.value_or(cfg.value("seed", std::uint64_t{0}));
            const auto imp = cfg.value("impacts", json::object());
            io.impacts = args.impacts.value_or(imp.value("count", std::size_t{10}));
            io.spacing_s = imp.value("spacing_s", io.spacing_s);
            io.first_s = imp.value("first_s", io.first_s);
            io.amplitude = imp.value("amplitude_n", io.amplitude);
            io.amplitude_jitter = imp.value("jitter", io.amplitude_jitter);
            if (imp.contains("snr_db") && !imp.at("snr_db").is_null()) io.noise.snr_db = imp.at("snr_db").get<double>();
            if (imp.contains("high_band_noise_ratio") && !imp.at("high_band_noise_ratio").is_null()) {
                io.high_band_noise_ratio = imp.at("high_band_noise_ratio").get<double>();
            }
            if (args.snr_db) io.noise.snr_db = *args.snr_db;
            io.noise.seed = seed;
            if (cfg.contains("passage") && !cfg.at("passage").is_null()) {
                const auto& p = cfg.at("passage");
                sched = ic3_like_schedule(p.value("speed_kmh", 160.0), p.value("first_arrival_s", 0.1),
                                          p.value("axle_load_t", 10.0));
                sched->train_type = p.value("train_type", sched->train_type);
                passage_duration = p.value("duration_s", passage_duration);
                passage_amplitude = p.value("amplitude_n", passage_amplitude);
                if (p.contains("snr_db") && !p.at("snr_db").is_null()) passage_noise.snr_db = p.at("snr_db").get<double>();
                if (args.snr_db) passage_noise.snr_db = *args.snr_db;
                passage_noise.seed = seed + 1000003;
            }
            if (io.impacts == 0) throw InvalidParameterError("impact count must be positive");
        } catch (const InvalidParameterError& e) {
            throw ParseError(std::string("invalid synth config: ") + e.what(), 0);
        }

        const auto impacts = simulate_impact_record(track, io);
        const auto dir = prepare_dir(args.out_dir);
        write_file(dir / "impacts.csv", [&](std::ostream& o) { write_record_csv(o, impacts); });
        json truth{{"track", track}, {"modes", analytic_modes(track)}, {"impacts", io.impacts}};
        if (sched) {
            Record passage;
            passage.accel = simulate_passage(track, *sched, passage_duration, passage_amplitude, passage_noise);
            write_file(dir / "passage.csv", [&](std::ostream& o) { write_record_csv(o, passage); });
            write_json(dir / "manifest.json",
                       ClusterKeys{sched->train_type, sched->speed_kmh, sched->axle_load_t});
            truth["schedule"] = *sched;
        }
        write_json(dir / "truth.json", truth);
        log << "wrote " << io.impacts << " impacts" << (sched ? " and one passage" : "") << " to "
            << dir.string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_trend(const TrendArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        const ModelRegistry reg(args.registry.value_or(default_registry_path()));
        const auto entries = reg.entries(args.location);
        if (entries.empty()) {
            log << "error: no registry entries for location '" << args.location << "' in " << reg.path() << '\n';
            return static_cast<int>(kExitUnknownLocation);
        }
        const auto dir = prepare_dir(args.out_dir);
        write_file(dir / "trend.csv", [&](std::ostream& o) { write_trend_csv(o, entries); });
        return static_cast<int>(kExitOk);
    });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Railway track modal identification from impact and passage vibration records", "modalid"};
    app.require_subcommand(1);

    CoherenceArgs ca;
    auto* coherence = app.add_subcommand("coherence", "Averaged impact coherence and valid band");
    coherence->add_option("input", ca.input, "Impact record CSV (time_s,force_n,accel)")->required();
    coherence->add_option("--sample-rate", ca.sample_rate, "Override the sample rate inferred from time_s");
    coherence->add_option("--coherence-threshold", ca.coherence_threshold, "Valid-band threshold");
    coherence->add_option("--out-dir", ca.out_dir, "Output directory");

    IdentifyArgs ia;
    auto* identify = app.add_subcommand("identify", "Identify the composite model of one location");
    identify->add_option("input", ia.input, "Impact record CSV")->required();
    identify->add_option("--location", ia.location, "Location id")->required();
    identify->add_option("--config", ia.config_path, "Identification configuration JSON");
    identify->add_option("--sample-rate", ia.sample_rate, "Override the sample rate");
    identify->add_option("--split-hz", ia.split_hz, "Band split frequency (default 200)");
    identify->add_option("--lowpass-hz", ia.lowpass_hz, "Preprocessing lowpass (default 800)");
    identify->add_option("--band", ia.bands, "Band lo:hi, given twice (low then high)");
    identify->add_option("--coherence-threshold", ia.coherence_threshold, "Valid-band threshold (default 0.8)");
    identify->add_option("--seed", ia.seed, "Identification/validation split seed");
    identify->add_option("--horizon-ms", ia.horizon_ms, "Initial-state horizon for validation (default 20)");
    identify->add_option("--timestamp", ia.timestamp, "Registry timestamp (default: now, UTC)");
    identify->add_option("--registry", ia.registry, "Registry file (default $MODALID_REGISTRY)");
    identify->add_flag("--no-registry", ia.no_registry, "Do not append to the registry");
    identify->add_option("--out-dir", ia.out_dir, "Output directory");

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Score a model against a train passage");
    validate->add_option("model", va.model, "model.json")->required();
    validate->add_option("passage", va.passage, "Passage CSV (time_s,accel)")->required();
    validate->add_option("manifest", va.manifest, "Train metadata JSON");
    validate->add_option("--sample-rate", va.sample_rate, "Override the sample rate");
    validate->add_option("--horizon-ms", va.horizon_ms, "Initial-state horizon (default 20)");
    validate->add_option("--out-dir", va.out_dir, "Output directory");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a track configuration");
    synth->add_option("config", sa.config, "Synth configuration JSON")->required();
    synth->add_option("--seed", sa.seed, "Noise and jitter seed");
    synth->add_option("--impacts", sa.impacts, "Number of hammer impacts");
    synth->add_option("--snr-db", sa.snr_db, "Additive white noise SNR");
    synth->add_option("--track-configs", sa.track_configs, "Named location parameter file");
    synth->add_option("--out-dir", sa.out_dir, "Output directory");

    TrendArgs ta;
    auto* trend = app.add_subcommand("trend", "Modal parameter history of one location");
    trend->add_option("--location", ta.location, "Location id")->required();
    trend->add_option("--registry", ta.registry, "Registry file (default $MODALID_REGISTRY)");
    trend->add_option("--out-dir", ta.out_dir, "Output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (coherence->parsed()) return cmd_coherence(ca, err);
    if (identify->parsed()) return cmd_identify(ia, err);
    if (validate->parsed()) return cmd_validate(va, err);
    if (synth->parsed()) return cmd_synth(sa, err);
    if (trend->parsed()) return cmd_trend(ta, err);
    return kExitUsage;
}

}  // namespace modalid
