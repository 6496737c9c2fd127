#include "bcgen/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bcgen/common.hpp"

namespace bcgen {

namespace {

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': invalid number '" +
                              value + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': invalid integer '" +
                              value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ValidationError("config key '" + key + "': expected true/false");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_key(AppConfig& c, const std::string& raw_key,
                      const std::string& value) {
    // Training keys may appear either at top level or inside a [train]
    // section; both spellings map to the same TrainConfig field.
    std::string key = raw_key;
    if (key.rfind("train.", 0) == 0) key = key.substr(6);
    if (key == "seed") {
        c.seed = static_cast<std::uint64_t>(parse_int(key, value));
        c.train.seed = c.seed;
        c.synth.seed = c.seed;
    } else if (key == "threads") {
        c.threads = static_cast<int>(parse_int(key, value));
        if (c.threads < 1)
            throw ValidationError("config key 'threads': must be >= 1");
    } else if (key == "gamma") {
        c.train.gamma = parse_double(key, value);
        if (c.train.gamma < 0.0 || c.train.gamma >= 1.0)
            throw ValidationError("config key 'gamma': must lie in [0, 1)");
    } else if (key == "lr") {
        c.train.lr = parse_double(key, value);
    } else if (key == "minibatch") {
        c.train.minibatch = static_cast<int>(parse_int(key, value));
    } else if (key == "epochs") {
        c.train.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "target_sync") {
        c.train.target_sync = static_cast<int>(parse_int(key, value));
    } else if (key == "buffer_capacity") {
        c.train.buffer_capacity =
            static_cast<std::size_t>(parse_int(key, value));
    } else if (key == "eps_start") {
        c.train.eps_start = parse_double(key, value);
    } else if (key == "eps_end") {
        c.train.eps_end = parse_double(key, value);
    } else if (key == "max_grad_norm") {
        c.train.max_grad_norm = parse_double(key, value);
    } else if (key == "algorithm") {
        if (value == "nfq")
            c.train.algorithm = Algorithm::nfq;
        else if (value == "batch-dqn" || value == "batch_dqn")
            c.train.algorithm = Algorithm::batch_dqn;
        else
            throw ValidationError(
                "config key 'algorithm': expected nfq or batch-dqn");
    } else if (key == "reward_window") {
        if (value == "trailing")
            c.reward_window = RewardWindow::trailing;
        else if (value == "leading")
            c.reward_window = RewardWindow::leading;
        else
            throw ValidationError(
                "config key 'reward_window': expected trailing or leading");
    } else if (key == "pace_window_s") {
        c.pace_window_s = parse_double(key, value);
        if (c.pace_window_s <= 0.0)
            throw ValidationError("config key 'pace_window_s': must be > 0");
    } else if (key == "normalize_features") {
        c.normalize_features = parse_bool(key, value);
    } else if (key == "augment") {
        c.augment = parse_bool(key, value);
    } else if (key == "ope_horizon") {
        c.ope_horizon = static_cast<int>(parse_int(key, value));
    } else if (key == "ope_shift") {
        c.ope_shift = static_cast<int>(parse_int(key, value));
    } else if (key == "ope_return_horizon") {
        c.ope_return_horizon = static_cast<int>(parse_int(key, value));
    } else if (key == "knn_k") {
        c.knn_k = static_cast<int>(parse_int(key, value));
    } else if (key == "knn_max_reference") {
        c.knn_max_reference = static_cast<std::size_t>(parse_int(key, value));
    } else if (key == "ope_max_trajectories") {
        c.ope_max_trajectories = static_cast<std::size_t>(parse_int(key, value));
    } else if (key == "soften_p") {
        c.soften_p = parse_double(key, value);
    } else if (key == "synth.n_sessions") {
        c.synth.n_sessions = static_cast<int>(parse_int(key, value));
    } else if (key == "synth.session_s") {
        c.synth.session_s = parse_double(key, value);
    } else if (key == "synth.sessions_per_pair") {
        c.synth.sessions_per_pair = static_cast<int>(parse_int(key, value));
    } else if (key == "synth.dwell_speaking_s") {
        c.synth.dwell_speaking_s = parse_double(key, value);
    } else if (key == "synth.dwell_pausing_s") {
        c.synth.dwell_pausing_s = parse_double(key, value);
    } else if (key == "synth.dwell_post_s") {
        c.synth.dwell_post_s = parse_double(key, value);
    } else if (key == "synth.laugh_rate_speaking") {
        c.synth.laugh_rate_speaking = parse_double(key, value);
    } else if (key == "synth.laugh_rate_pausing") {
        c.synth.laugh_rate_pausing = parse_double(key, value);
    } else if (key == "synth.laugh_rate_post") {
        c.synth.laugh_rate_post = parse_double(key, value);
    } else if (key == "synth.laugh_mean_s") {
        c.synth.laugh_mean_s = parse_double(key, value);
    } else if (key == "synth.ce_boost_events") {
        c.synth.ce_boost_events = static_cast<int>(parse_int(key, value));
    } else if (key == "synth.feature_noise_sd") {
        c.synth.feature_noise_sd = parse_double(key, value);
    } else {
        throw ValidationError("unknown config key '" + key + "'");
    }
}

AppConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    AppConfig config;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (!section.empty()) key = section + "." + key;
        apply_config_key(config, key, value);
    }
    config.train.validate();
    return config;
}

std::uint64_t AppConfig::hash() const {
    std::ostringstream ss;
    ss << seed << '|' << static_cast<int>(reward_window) << '|'
       << pace_window_s << '|' << normalize_features << '|' << augment << '|'
       << ope_horizon << '|' << ope_shift << '|' << ope_return_horizon << '|'
       << knn_k << '|' << knn_max_reference << '|' << ope_max_trajectories
       << '|' << soften_p << '|' << train.hash() << '|' << synth.hash();
    return fnv1a(ss.str());
}

}  // namespace bcgen
