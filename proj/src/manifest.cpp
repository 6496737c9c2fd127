#include "bcgen/manifest.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "bcgen/common.hpp"

namespace bcgen {

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot hash missing file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, hash_file(path));
}

void RunManifest::add_output(const std::string& path) {
    outputs.emplace_back(path, hash_file(path));
}

void RunManifest::write(const std::string& path) const {
    nlohmann::json j;
    j["command"] = command;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = hex64(config_hash);
    j["seed"] = seed;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j["timestamp_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    j["wall_clock_s"] = wall_clock_s;
    for (const auto& [p, h] : inputs)
        j["inputs"].push_back({{"path", p}, {"hash", hex64(h)}});
    for (const auto& [p, h] : outputs)
        j["outputs"].push_back({{"path", p}, {"hash", hex64(h)}});
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace bcgen
