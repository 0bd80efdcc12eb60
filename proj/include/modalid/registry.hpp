#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "modalid/compose.hpp"

namespace modalid {

struct RegistryEntry {
    std::string timestamp;  // ISO-8601 UTC, orders lexicographically
    std::string config_fingerprint;
    nlohmann::json model;   // serialized CompositeModel
    ModalParameters modes;
};

/// Append-only JSON store of identified models per location. Writers serialize through an
/// advisory lock on `<path>.lock`; the file is replaced atomically.
class ModelRegistry {
public:
    explicit ModelRegistry(std::string path);

    const std::string& path() const noexcept { return path_; }

    /// Inserts after every existing entry with a timestamp not later than this one.
    void append(const std::string& location_id, const RegistryEntry& entry) const;

    /// Time-ordered entries; empty when the location or the file is absent.
    std::vector<RegistryEntry> entries(const std::string& location_id) const;
    std::vector<std::string> locations() const;

    nlohmann::json load() const;

private:
    std::string path_;
};

/// MODALID_REGISTRY when set, otherwise modalid_registry.json in the working directory.
std::string default_registry_path();

/// 64-bit FNV-1a over the canonical JSON dump of the configuration, as 16 hex digits.
std::string config_fingerprint(const IdentificationConfig& cfg);
std::uint64_t fnv1a64(const std::string& bytes);

RegistryEntry make_entry(const CompositeModel& model, const IdentificationConfig& cfg,
                         std::string timestamp);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// `timestamp,mode,freq_hz,freq_std_hz,damping,damping_std`, one row per entry and mode.
void write_trend_csv(std::ostream& out, const std::vector<RegistryEntry>& entries);

void to_json(nlohmann::json& j, const RegistryEntry& e);
void from_json(const nlohmann::json& j, RegistryEntry& e);

}  // namespace modalid
