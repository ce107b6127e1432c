#pragma once

// Run manifests: the fully resolved scenario, seed, durations and digests of
// every output file, written next to each CLI result so a run can be
// reproduced byte for byte.

#include "photonlink/scenario.hpp"
#include "photonlink/version.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace photonlink {

/// FNV-1a 64-bit digest, used to fingerprint output files.
inline uint64_t fnv1a64(const void* data, size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open " + path.string());
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

struct RunManifest {
    std::string command;
    LinkScenario scenario;
    uint64_t seed = 0;
    double duration_s = 0.0;
    int threads = 1;
    struct Output {
        std::string path;
        uint64_t bytes;
        std::string fnv1a64;
    };
    std::vector<Output> outputs;

    void add_output(const std::filesystem::path& path) {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(path)));
        outputs.push_back({path.string(),
                           static_cast<uint64_t>(std::filesystem::file_size(path)), hex});
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["toolkit_version"] = PHOTONLINK_VERSION;
        j["command"] = command;
        j["rng"] = "philox4x32-10";
        j["scenario"] = photonlink::to_json(scenario);
        j["seed"] = seed;
        j["duration_s"] = duration_s;
        j["threads"] = threads;
        j["outputs"] = nlohmann::json::array();
        for (const auto& o : outputs)
            j["outputs"].push_back(
                {{"path", o.path}, {"bytes", o.bytes}, {"fnv1a64", o.fnv1a64}});
        return j;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream os(path);
        if (!os)
            throw std::runtime_error("cannot write manifest " + path.string());
        os << to_json().dump(2) << "\n";
    }
};

} // namespace photonlink
