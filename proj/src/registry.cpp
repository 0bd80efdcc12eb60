#include "modalid/registry.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>

#include "modalid/csv_io.hpp"
#include "modalid/error.hpp"

namespace modalid {
namespace {

class FileLock {
public:
    explicit FileLock(const std::string& path) : fd_(::open(path.c_str(), O_RDWR | O_CREAT, 0644)) {
        if (fd_ < 0) throw Error("cannot open lock file '" + path + "'");
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw Error("cannot lock '" + path + "'");
        }
    }
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_;
};

nlohmann::json empty_store() { return nlohmann::json{{"version", 1}, {"locations", nlohmann::json::object()}}; }

/// A missing file, an empty file and `{}` all read as a registry without entries.
nlohmann::json read_store(const std::string& path) {
    std::ifstream in(path);
    if (!in) return empty_store();
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return empty_store();
    try {
        auto j = nlohmann::json::parse(text);
        if (j.is_object() && j.empty()) return empty_store();
        if (!j.contains("locations") || !j.at("locations").is_object()) {
            throw ParseError("registry '" + path + "' lacks a locations object", 0);
        }
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("registry '" + path + "': " + e.what(), 0);
    }
}

}  // namespace

ModelRegistry::ModelRegistry(std::string path) : path_(std::move(path)) {}

nlohmann::json ModelRegistry::load() const { return read_store(path_); }

void ModelRegistry::append(const std::string& location_id, const RegistryEntry& entry) const {
    if (location_id.empty()) throw InvalidParameterError("location id must not be empty");
    FileLock lock(path_ + ".lock");
    auto store = read_store(path_);
    auto& list = store["locations"][location_id];
    if (list.is_null()) list = nlohmann::json::array();
    auto pos = list.end();
    while (pos != list.begin() && (pos - 1)->at("timestamp").get<std::string>() > entry.timestamp) --pos;
    list.insert(pos, nlohmann::json(entry));

    const std::string tmp = path_ + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp + "'");
        out << store.dump(1) << '\n';
        if (!out) throw Error("failed writing '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path_);
}

std::vector<RegistryEntry> ModelRegistry::entries(const std::string& location_id) const {
    const auto store = read_store(path_);
    std::vector<RegistryEntry> out;
    const auto& locs = store.at("locations");
    if (!locs.contains(location_id)) return out;
    for (const auto& e : locs.at(location_id)) out.push_back(e.get<RegistryEntry>());
    std::stable_sort(out.begin(), out.end(),
                     [](const RegistryEntry& a, const RegistryEntry& b) { return a.timestamp < b.timestamp; });
    return out;
}

std::vector<std::string> ModelRegistry::locations() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : read_store(path_).at("locations").items()) out.push_back(k);
    return out;
}

std::string default_registry_path() {
    if (const char* env = std::getenv("MODALID_REGISTRY"); env && *env) return env;
    return "modalid_registry.json";
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_fingerprint(const IdentificationConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(nlohmann::json(cfg).dump())));
    return buf;
}

RegistryEntry make_entry(const CompositeModel& model, const IdentificationConfig& cfg, std::string timestamp) {
    RegistryEntry e;
    e.timestamp = std::move(timestamp);
    e.config_fingerprint = config_fingerprint(cfg);
    e.model = model;
    e.modes = model.modes;
    return e;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_trend_csv(std::ostream& out, const std::vector<RegistryEntry>& entries) {
    out << "timestamp,mode,freq_hz,freq_std_hz,damping,damping_std\n";
    for (const auto& e : entries) {
        for (std::size_t k = 0; k < e.modes.modes.size(); ++k) {
            const auto& m = e.modes.modes[k];
            out << e.timestamp << ',' << k + 1 << ',' << format_sig(m.freq_hz) << ','
                << (m.freq_std ? format_sig(*m.freq_std) : "") << ',' << format_sig(m.damping) << ','
                << (m.damping_std ? format_sig(*m.damping_std) : "") << '\n';
        }
    }
}

void to_json(nlohmann::json& j, const RegistryEntry& e) {
    j = nlohmann::json{{"timestamp", e.timestamp},
                       {"config_fingerprint", e.config_fingerprint},
                       {"model", e.model},
                       {"modes", e.modes}};
}

void from_json(const nlohmann::json& j, RegistryEntry& e) {
    e.timestamp = j.at("timestamp").get<std::string>();
    e.config_fingerprint = j.value("config_fingerprint", std::string{});
    e.model = j.value("model", nlohmann::json::object());
    e.modes = j.at("modes").get<ModalParameters>();
}

}  // namespace modalid
