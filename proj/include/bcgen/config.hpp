#ifndef BCGEN_CONFIG_HPP
#define BCGEN_CONFIG_HPP

#include <cstdint>
#include <string>

#include "bcgen/batch_rl.hpp"
#include "bcgen/engagement.hpp"
#include "bcgen/synth.hpp"

namespace bcgen {

/// All tunable knobs, with the documented defaults. Parsed from a
/// TOML-style key = value file; unknown keys are rejected.
struct AppConfig {
    std::uint64_t seed = 1;
    int threads = 1;

    TrainConfig train;              // gamma, lr, minibatch, epochs, ...
    RewardWindow reward_window = RewardWindow::trailing;
    double pace_window_s = kPaceWindowS;
    bool normalize_features = false;
    bool augment = true;

    // off-policy evaluation
    int ope_horizon = 100;
    int ope_shift = 1;
    int ope_return_horizon = 0;     // optional second estimate, 0 disables
    int knn_k = 50;
    std::size_t knn_max_reference = 0;  // 0: exact over the full set
    std::size_t ope_max_trajectories = 0;
    double soften_p = 0.9;

    SynthConfig synth;

    std::uint64_t hash() const;
};

/// Parses `key = value` lines ('#' comments, blank lines ignored) into
/// an AppConfig. Missing file or unknown/invalid keys raise
/// ValidationError naming the key.
AppConfig parse_config(const std::string& path);

/// Applies one key; exposed for CLI overrides.
void apply_config_key(AppConfig& config, const std::string& key,
                      const std::string& value);

}  // namespace bcgen

#endif
