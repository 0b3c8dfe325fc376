#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cartoonlab {

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Content hash with timestamp lines excluded, so re-runs of the same config
// and seed produce identical manifests.
inline std::uint64_t content_hash(const std::string& data) {
    std::string filtered;
    filtered.reserve(data.size());
    std::istringstream in(data);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# generated-at:", 0) == 0) continue;
        filtered += line;
        filtered += '\n';
    }
    return fnv1a64(filtered);
}

struct ManifestEntry {
    std::string path;  // relative to the bundle directory
    std::uint64_t bytes = 0;
    std::string hash;  // hex fnv1a64 of timestamp-filtered content
};

// Every run produces a bundle directory: config echo, record/table files,
// optional SVGs, and this manifest listing each file with its hash.
class ArtifactBundle {
public:
    explicit ArtifactBundle(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    void write_file(const std::string& name, const std::string& content) {
        auto path = dir_ / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << content;
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(content_hash(content)));
        entries_.push_back({name, content.size(), hex});
    }

    void finalize() const {
        nlohmann::json j;
        j["files"] = nlohmann::json::array();
        for (const auto& e : entries_)
            j["files"].push_back({{"path", e.path}, {"bytes", e.bytes}, {"hash", e.hash}});
        std::ofstream f(dir_ / "manifest.json", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write manifest in " + dir_.string());
        f << j.dump(2) << '\n';
    }

    const std::vector<ManifestEntry>& entries() const { return entries_; }

private:
    std::filesystem::path dir_;
    std::vector<ManifestEntry> entries_;
};

inline nlohmann::json load_manifest(const std::filesystem::path& bundle_dir) {
    return nlohmann::json::parse(read_file((bundle_dir / "manifest.json").string()));
}

// Re-hash every listed file and compare against the manifest.
inline bool verify_manifest(const std::filesystem::path& bundle_dir) {
    auto j = load_manifest(bundle_dir);
    for (const auto& e : j.at("files")) {
        std::string content = read_file((bundle_dir / e.at("path").get<std::string>()).string());
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(content_hash(content)));
        if (e.at("hash").get<std::string>() != hex) return false;
    }
    return true;
}

}  // namespace cartoonlab
