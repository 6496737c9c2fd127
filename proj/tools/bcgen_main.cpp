// bcgen: backchannel-timing policy learning from logged dyadic interaction.
//
// Subcommands cover the full pipeline: synth -> features -> rewards ->
// tuples -> train -> residual / ope / stats, plus an end-to-end
// `pipeline` driver. Logs go to stderr; machine-readable results go to
// files, each accompanied by a .manifest.json provenance sidecar.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bcgen/audio.hpp"
#include "bcgen/batch_rl.hpp"
#include "bcgen/common.hpp"
#include "bcgen/config.hpp"
#include "bcgen/corpus.hpp"
#include "bcgen/dataset.hpp"
#include "bcgen/manifest.hpp"
#include "bcgen/ope.hpp"
#include "bcgen/synth.hpp"

namespace fs = std::filesystem;
using namespace bcgen;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double elapsed_s() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
            .count();
    }
};

AppConfig load_config(const std::string& path) {
    if (path.empty()) return AppConfig{};
    return parse_config(path);
}

/// Train-fold and test-fold transition subsets for LOSO fold k
/// (k < 0: everything is the train set, test set empty).
struct FoldSubsets {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::uint32_t> train_sessions;
    std::vector<std::uint32_t> test_sessions;
};

FoldSubsets fold_subsets(const TupleDataset& data, int fold) {
    FoldSubsets out;
    if (fold < 0) return out;
    const FoldSplit split = loso_split(data.sessions());
    if (static_cast<std::size_t>(fold) >= split.n_folds())
        throw ValidationError("fold " + std::to_string(fold) +
                              " out of range; corpus has " +
                              std::to_string(split.n_folds()) + " folds");
    out.train_sessions = split.train_sessions[fold];
    out.test_sessions = split.test_sessions[fold];
    out.train = transitions_for_sessions(data, out.train_sessions);
    out.test = transitions_for_sessions(data, out.test_sessions);
    return out;
}

TupleDataset load_dataset(const std::string& path, const AppConfig& config) {
    TupleDataset data = TupleDataset::load(path);
    if (config.normalize_features) data = data.standardized();
    return data;
}

std::vector<OpeTrajectory> cap_trajectories(std::vector<OpeTrajectory> trajs,
                                            std::size_t max_n) {
    if (max_n == 0 || trajs.size() <= max_n) return trajs;
    // evenly spaced deterministic subsample
    std::vector<OpeTrajectory> out;
    out.reserve(max_n);
    const double stride =
        static_cast<double>(trajs.size()) / static_cast<double>(max_n);
    for (std::size_t i = 0; i < max_n; ++i)
        out.push_back(trajs[static_cast<std::size_t>(i * stride)]);
    return out;
}

int run_synth(const std::string& config_path, const std::string& out_dir,
              std::int64_t seed_override) {
    Timer timer;
    AppConfig config = load_config(config_path);
    if (seed_override >= 0) {
        config.synth.seed = static_cast<std::uint64_t>(seed_override);
        config.seed = config.synth.seed;
    }
    generate_corpus(config.synth, out_dir);
    std::cerr << "wrote corpus with " << config.synth.n_sessions
              << " sessions to " << out_dir << "\n";

    RunManifest m;
    m.command = "synth";
    m.config_hash = config.hash();
    m.seed = config.synth.seed;
    m.wall_clock_s = timer.elapsed_s();
    m.add_output((fs::path(out_dir) / "corpus.json").string());
    m.write((fs::path(out_dir) / "corpus.json.manifest.json").string());
    return 0;
}

int run_features(const std::string& wav_path, const std::string& out_path,
                 const std::string& config_path) {
    Timer timer;
    AppConfig config = load_config(config_path);
    const AudioClip clip = read_wav(wav_path);
    const auto frames = base_features(clip);
    const auto states = state_stream(frames);
    write_feature_csv(out_path, states, config.hash());
    std::cerr << "extracted " << states.size() << " state frames from "
              << wav_path << "\n";

    RunManifest m;
    m.command = "features";
    m.config_hash = config.hash();
    m.seed = config.seed;
    m.wall_clock_s = timer.elapsed_s();
    m.add_input(wav_path);
    m.add_output(out_path);
    m.write(out_path + ".manifest.json");
    return 0;
}

int run_rewards(const std::string& annotations_path, double duration_s,
                const std::string& out_path, const std::string& config_path) {
    Timer timer;
    AppConfig config = load_config(config_path);
    if (duration_s <= 0.0)
        throw ValidationError("--duration must be positive");
    const auto annotations = read_annotations_jsonl(annotations_path);
    const auto ces = extract_connection_events(annotations);
    const auto n_frames =
        static_cast<std::size_t>(duration_s * kFrameRateHz);
    const PaceSeries series =
        reward_series(ces, n_frames, kFrameRateHz, config.pace_window_s, 0.0,
                      config.reward_window, duration_s);
    write_reward_csv(out_path, series, kFrameRateHz);
    std::cerr << ces.size() << " connection events, " << n_frames
              << " reward ticks\n";

    RunManifest m;
    m.command = "rewards";
    m.config_hash = config.hash();
    m.seed = config.seed;
    m.wall_clock_s = timer.elapsed_s();
    m.add_input(annotations_path);
    m.add_output(out_path);
    m.write(out_path + ".manifest.json");
    return 0;
}

int run_tuples(const std::string& features_dir,
               const std::string& annotations_dir, const std::string& out_path,
               bool augment_flag, const std::string& reward_window,
               const std::string& config_path) {
    Timer timer;
    AppConfig config = load_config(config_path);
    if (augment_flag) config.augment = true;
    if (!reward_window.empty())
        apply_config_key(config, "reward_window", reward_window);
    const std::string adir =
        annotations_dir.empty() ? features_dir : annotations_dir;

    CorpusBuildResult result = build_dataset_from_corpus(
        features_dir, adir, config.augment, config.reward_window);
    result.data.save(out_path);
    std::cerr << "built " << result.data.size() << " tuples from "
              << result.data.sessions().size() << " session records\n";

    RunManifest m;
    m.command = "tuples";
    m.config_hash = config.hash();
    m.seed = config.seed;
    m.wall_clock_s = timer.elapsed_s();
    m.add_input((fs::path(features_dir) / "corpus.json").string());
    m.add_output(out_path);
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& [sid, n] : result.per_session_counts)
        counts.push_back({{"session_id", sid}, {"tuples", n}});
    // manifest with per-session tuple counts appended
    nlohmann::json extra;
    extra["per_session_counts"] = counts;
    extra["total_tuples"] = result.data.size();
    extra["corpus_hash"] = hex64(result.data.config_hash());
    std::ofstream det(out_path + ".counts.json");
    det << extra.dump(2) << "\n";
    m.add_output(out_path + ".counts.json");
    m.write(out_path + ".manifest.json");
    return 0;
}

int run_train(const std::string& algo, const std::string& data_path, int fold,
              const std::string& config_path, const std::string& out_path,
              const std::string& report_path) {
    Timer timer;
    AppConfig config = load_config(config_path);
    if (!algo.empty()) apply_config_key(config, "algorithm", algo);

    const TupleDataset data = load_dataset(data_path, config);
    const FoldSubsets folds = fold_subsets(data, fold);
    TrainReport report = train(data, config.train, folds.train);
    save_params(report.params, out_path, config.hash());
    if (!report_path.empty()) write_train_report_json(report, report_path);
    std::cerr << "trained "
              << (config.train.algorithm == Algorithm::nfq ? "nfq"
                                                           : "batch-dqn")
              << ", final training residual "
              << report.residual_history.back() << "\n";

    RunManifest m;
    m.command = "train";
    m.config_hash = config.hash();
    m.seed = config.train.seed;
    m.wall_clock_s = timer.elapsed_s();
    m.add_input(data_path);
    m.add_output(out_path);
    if (!report_path.empty()) m.add_output(report_path);
    m.write(out_path + ".manifest.json");
    return 0;
}

int run_residual(const std::string& model_path, const std::string& data_path,
                 int fold, const std::string& out_path,
                 const std::string& config_path) {
    Timer timer;
    AppConfig config = load_config(config_path);
    const TupleDataset data = load_dataset(data_path, config);
    const LoadedParams lp = load_params(model_path);
    const FoldSubsets folds = fold_subsets(data, fold);
    const auto& subset = fold < 0 ? folds.train : folds.test;
    const double br =
        bellman_residual(lp.params, data, config.train.gamma, subset);

    nlohmann::json j;
    j["bellman_residual"] = br;
    j["gamma"] = config.train.gamma;
    j["model_config_hash"] = hex64(lp.config_hash);
    j["fold"] = fold;
    j["n_transitions"] = subset.empty() ? data.size() : subset.size();
    std::ofstream out(out_path);
    if (!out) throw ComputeError("cannot write " + out_path);
    out << j.dump(2) << "\n";
    std::cerr << "Bellman residual " << br << "\n";

    RunManifest m;
    m.command = "residual";
    m.config_hash = config.hash();
    m.seed = config.seed;
    m.wall_clock_s = timer.elapsed_s();
    m.add_input(data_path);
    m.add_input(model_path);
    m.add_output(out_path);
    m.write(out_path + ".manifest.json");
    return 0;
}

int run_ope(const std::string& data_path, const std::string& model_path,
            const std::string& baseline, int fold, const std::string& out_path,
            const std::string& config_path) {
    Timer timer;
    AppConfig config = load_config(config_path);
    const TupleDataset data = load_dataset(data_path, config);
    const LoadedParams lp = load_params(model_path);
    const FoldSubsets folds = fold_subsets(data, fold);

    auto trajectories =
        cap_trajectories(make_trajectories(data, config.ope_horizon,
                                           config.ope_shift,
                                           folds.test_sessions),
                         config.ope_max_trajectories);
    if (trajectories.empty())
        throw ComputeError("no trajectories of length " +
                           std::to_string(config.ope_horizon));

    PolicySpec behavior;
    KnnBehaviorModel knn(data, folds.train, config.knn_k,
                         config.knn_max_reference, config.seed);
    if (baseline == "uniform")
        behavior = uniform_policy();
    else
        behavior = knn.as_policy();
    const PolicySpec target = soften_greedy(lp.params, config.soften_p);

    const double v_target = step_wis(data, trajectories, target, behavior,
                                     config.train.gamma);
    const double v_behavior = step_wis(data, trajectories, behavior, behavior,
                                       config.train.gamma);
    const double v_mc = mc_return(data, trajectories, config.train.gamma);

    nlohmann::json j;
    j["n_trajectories"] = trajectories.size();
    j["horizon"] = config.ope_horizon;
    j["shift"] = config.ope_shift;
    j["gamma"] = config.train.gamma;
    j["baseline"] = baseline;
    j["v_target_policy"] = v_target;
    j["v_behavior_policy"] = v_behavior;
    j["v_monte_carlo"] = v_mc;
    if (config.ope_return_horizon > 0) {
        auto long_trajs = cap_trajectories(
            make_trajectories(data, config.ope_return_horizon,
                              config.ope_shift, folds.test_sessions),
            config.ope_max_trajectories);
        if (!long_trajs.empty()) {
            j["return_horizon"] = config.ope_return_horizon;
            j["v_target_policy_long"] = step_wis(
                data, long_trajs, target, behavior, config.train.gamma);
        }
    }
    std::ofstream out(out_path);
    if (!out) throw ComputeError("cannot write " + out_path);
    out << j.dump(2) << "\n";
    std::cerr << "step-WIS: target " << v_target << ", behavior " << v_behavior
              << " (" << trajectories.size() << " trajectories)\n";

    RunManifest m;
    m.command = "ope";
    m.config_hash = config.hash();
    m.seed = config.seed;
    m.wall_clock_s = timer.elapsed_s();
    m.add_input(data_path);
    m.add_input(model_path);
    m.add_output(out_path);
    m.write(out_path + ".manifest.json");
    return 0;
}

int run_stats(const std::string& model_path, const std::string& data_path,
              int fold, const std::string& out_path,
              const std::string& config_path) {
    Timer timer;
    AppConfig config = load_config(config_path);
    const TupleDataset data = load_dataset(data_path, config);
    const LoadedParams lp = load_params(model_path);
    const FoldSubsets folds = fold_subsets(data, fold);

    const auto human = behavior_durations(data, folds.test_sessions);
    const auto agent =
        policy_rollout_durations(lp.params, data, folds.test_sessions);

    nlohmann::json j;
    j["fold"] = fold;
    auto stats_json = [](const std::vector<double>& d) {
        nlohmann::json s;
        s["count"] = d.size();
        if (!d.empty()) {
            const DurationStats st = duration_stats(d);
            s["mean"] = st.mean;
            s["max"] = st.max;
            s["std"] = st.std_dev;
            s["iqr"] = st.iqr;
        }
        return s;
    };
    j["behavior"] = stats_json(human);
    j["policy"] = stats_json(agent);
    if (!human.empty() && !agent.empty()) {
        const auto hp = DurationHistogram::from_durations(human);
        const auto ap = DurationHistogram::from_durations(agent);
        j["symmetric_kl"] = symmetric_kl(hp, ap);
    }
    std::ofstream out(out_path);
    if (!out) throw ComputeError("cannot write " + out_path);
    out << j.dump(2) << "\n";
    std::cerr << "behavior laughs " << human.size() << ", policy laughs "
              << agent.size() << "\n";

    RunManifest m;
    m.command = "stats";
    m.config_hash = config.hash();
    m.seed = config.seed;
    m.wall_clock_s = timer.elapsed_s();
    m.add_input(data_path);
    m.add_input(model_path);
    m.add_output(out_path);
    m.write(out_path + ".manifest.json");
    return 0;
}

int run_pipeline(const std::string& config_path, const std::string& out_dir) {
    AppConfig config = load_config(config_path);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    run_synth(config_path, (dir / "corpus").string(), -1);
    run_tuples((dir / "corpus").string(), "", (dir / "data.bin").string(),
               false, "", config_path);
    run_train("nfq", (dir / "data.bin").string(), 0, config_path,
              (dir / "model_nfq.bin").string(),
              (dir / "report_nfq.json").string());
    run_train("batch-dqn", (dir / "data.bin").string(), 0, config_path,
              (dir / "model_dqn.bin").string(),
              (dir / "report_dqn.json").string());
    run_residual((dir / "model_nfq.bin").string(), (dir / "data.bin").string(),
                 0, (dir / "residual_nfq.json").string(), config_path);
    run_residual((dir / "model_dqn.bin").string(), (dir / "data.bin").string(),
                 0, (dir / "residual_dqn.json").string(), config_path);
    run_ope((dir / "data.bin").string(), (dir / "model_dqn.bin").string(),
            "knn", 0, (dir / "ope.json").string(), config_path);
    run_stats((dir / "model_dqn.bin").string(), (dir / "data.bin").string(), 0,
              (dir / "stats.json").string(), config_path);
    std::cerr << "pipeline complete; reports under " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"backchannel-timing policy learning from logged interaction"};
    app.require_subcommand(1);

    std::string config_path, out_path, wav_path, annotations_path;
    std::string features_dir, annotations_dir, data_path, model_path;
    std::string report_path, algo, baseline = "knn", reward_window;
    std::int64_t seed_override = -1;
    int fold = -1;
    int threads = 1;
    double duration_s = 0.0;
    bool augment = false;

    app.add_option("--threads", threads, "worker thread cap")
        ->each([](const std::string&) {});

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--config", config_path, "config file");
    synth->add_option("--out", out_path, "output corpus directory")
        ->required();
    synth->add_option("--seed", seed_override, "seed override");

    auto* features =
        app.add_subcommand("features", "extract state features from audio");
    features->add_option("--wav", wav_path, "16 kHz mono PCM WAV")->required();
    features->add_option("--out", out_path, "feature CSV path")->required();
    features->add_option("--config", config_path, "config file");

    auto* rewards =
        app.add_subcommand("rewards", "pace rewards from annotations");
    rewards->add_option("--annotations", annotations_path, "annotation JSONL")
        ->required();
    rewards->add_option("--duration", duration_s, "session length (s)")
        ->required();
    rewards->add_option("--out", out_path, "reward CSV path")->required();
    rewards->add_option("--config", config_path, "config file");

    auto* tuples = app.add_subcommand("tuples", "assemble transition tuples");
    tuples->add_option("--features", features_dir, "corpus/features directory")
        ->required();
    tuples->add_option("--annotations", annotations_dir,
                       "annotations directory (defaults to --features)");
    tuples->add_option("--out", out_path, "dataset output path")->required();
    tuples->add_flag("--augment", augment, "add role-swapped twins");
    tuples->add_option("--reward-window", reward_window, "trailing|leading");
    tuples->add_option("--config", config_path, "config file");

    auto* trainc = app.add_subcommand("train", "train a Q-network offline");
    trainc->add_option("--algo", algo, "nfq|batch-dqn");
    trainc->add_option("--data", data_path, "tuple dataset")->required();
    trainc->add_option("--fold", fold, "LOSO fold to hold out (-1: none)");
    trainc->add_option("--config", config_path, "config file");
    trainc->add_option("--out", out_path, "model output path")->required();
    trainc->add_option("--report", report_path, "training report JSON");

    auto* residual =
        app.add_subcommand("residual", "Bellman residual of a model");
    residual->add_option("--model", model_path, "model file")->required();
    residual->add_option("--data", data_path, "tuple dataset")->required();
    residual->add_option("--fold", fold, "evaluate on this fold's test set");
    residual->add_option("--out", out_path, "output JSON")->required();
    residual->add_option("--config", config_path, "config file");

    auto* ope = app.add_subcommand("ope", "off-policy policy evaluation");
    ope->add_option("--data", data_path, "tuple dataset")->required();
    ope->add_option("--model", model_path, "model file")->required();
    ope->add_option("--baseline", baseline, "knn|uniform")
        ->check(CLI::IsMember({"knn", "uniform"}));
    ope->add_option("--fold", fold, "evaluate on this fold's test set");
    ope->add_option("--out", out_path, "output JSON")->required();
    ope->add_option("--config", config_path, "config file");

    auto* stats = app.add_subcommand("stats", "laugh-duration naturalness");
    stats->add_option("--model", model_path, "model file")->required();
    stats->add_option("--data", data_path, "tuple dataset")->required();
    stats->add_option("--fold", fold, "restrict to this fold's test set");
    stats->add_option("--out", out_path, "output JSON")->required();
    stats->add_option("--config", config_path, "config file");

    auto* pipeline = app.add_subcommand("pipeline", "end-to-end run");
    pipeline->add_option("--config", config_path, "config file")->required();
    pipeline->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        std::cerr << app.help() << std::flush;
        return 1;
    }

    try {
        if (*synth) return run_synth(config_path, out_path, seed_override);
        if (*features) return run_features(wav_path, out_path, config_path);
        if (*rewards)
            return run_rewards(annotations_path, duration_s, out_path,
                               config_path);
        if (*tuples)
            return run_tuples(features_dir, annotations_dir, out_path, augment,
                              reward_window, config_path);
        if (*trainc)
            return run_train(algo, data_path, fold, config_path, out_path,
                             report_path);
        if (*residual)
            return run_residual(model_path, data_path, fold, out_path,
                                config_path);
        if (*ope)
            return run_ope(data_path, model_path, baseline, fold, out_path,
                           config_path);
        if (*stats)
            return run_stats(model_path, data_path, fold, out_path,
                             config_path);
        if (*pipeline) return run_pipeline(config_path, out_path);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
