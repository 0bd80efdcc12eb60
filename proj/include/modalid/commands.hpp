#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace modalid {

/// Process exit codes. Zero iff every output file was written.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitParse = 2,            // unreadable input, model or configuration
    kExitSingleImpact = 3,     // fewer than two impacts found
    kExitIdentification = 4,   // no band could be identified
    kExitRateMismatch = 5,     // model and passage sample rates differ
    kExitUnknownLocation = 6,  // registry has no entry for the location
    kExitRuntime = 7,          // any other failure
};

struct CoherenceArgs {
    std::string input;
    std::optional<double> sample_rate;
    double coherence_threshold = 0.8;
    std::string out_dir = ".";
};

struct IdentifyArgs {
    std::string input;
    std::string location;
    std::optional<std::string> config_path;
    std::optional<double> sample_rate;
    std::optional<double> split_hz;
    std::optional<double> lowpass_hz;
    std::vector<std::string> bands;  // "lo:hi", exactly two when given
    std::optional<double> coherence_threshold;
    std::optional<std::uint64_t> seed;
    double horizon_ms = 20.0;
    std::optional<std::string> timestamp;  // registry timestamp, current UTC time by default
    std::optional<std::string> registry;   // default_registry_path() when absent
    bool no_registry = false;
    std::string out_dir = ".";
};

struct ValidateArgs {
    std::string model;
    std::string passage;
    std::optional<std::string> manifest;
    std::optional<double> sample_rate;
    double horizon_ms = 20.0;
    std::string out_dir = ".";
};

struct SynthArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> impacts;
    std::optional<double> snr_db;
    std::optional<std::string> track_configs;  // named location parameter file
    std::string out_dir = ".";
};

struct TrendArgs {
    std::string location;
    std::optional<std::string> registry;
    std::string out_dir = ".";
};

/// coherence.csv, validband.json, receptance.csv, resonances.json.
int cmd_coherence(const CoherenceArgs& args, std::ostream& log);
/// model.json, modes.csv, validation.json, plus a registry entry.
int cmd_identify(const IdentifyArgs& args, std::ostream& log);
/// fitreport.json, fit.csv.
int cmd_validate(const ValidateArgs& args, std::ostream& log);
/// impacts.csv, passage.csv, manifest.json, truth.json.
int cmd_synth(const SynthArgs& args, std::ostream& log);
/// trend.csv.
int cmd_trend(const TrendArgs& args, std::ostream& log);

/// Parses `args` (program name excluded) and dispatches to a command.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Bundled per-location track parameters.
std::string default_track_config_path();

}  // namespace modalid
