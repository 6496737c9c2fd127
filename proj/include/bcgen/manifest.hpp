#ifndef BCGEN_MANIFEST_HPP
#define BCGEN_MANIFEST_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace bcgen {

constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a content hash of a file.
std::uint64_t hash_file(const std::string& path);

/// Reproducibility sidecar written next to every pipeline output.
/// Numeric results never go here; only provenance.
struct RunManifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::uint64_t>> inputs;   // path, hash
    std::vector<std::pair<std::string, std::uint64_t>> outputs;  // path, hash
    double wall_clock_s = 0.0;

    void add_input(const std::string& path);
    void add_output(const std::string& path);

    /// Writes <first output>.manifest.json (or the given path).
    void write(const std::string& path) const;
};

}  // namespace bcgen

#endif
