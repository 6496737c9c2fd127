#include "bcgen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "bcgen/corpus.hpp"

namespace bcgen {

void TabularMdp::validate() const {
    if (n_states <= 0) throw ValidationError("mdp: n_states must be positive");
    if (p.size() != 2) throw ValidationError("mdp: exactly two actions");
    if (gamma < 0.0 || gamma >= 1.0)
        throw ValidationError("mdp: gamma must lie in [0, 1)");
    for (const auto& pa : p) {
        if (pa.rows() != n_states || pa.cols() != n_states)
            throw ValidationError("mdp: transition matrix shape mismatch");
        for (int s = 0; s < n_states; ++s)
            if (std::abs(pa.row(s).sum() - 1.0) > 1e-9)
                throw ValidationError("mdp: transition row does not sum to 1");
    }
    if (reward.rows() != n_states || reward.cols() != 2)
        throw ValidationError("mdp: reward shape mismatch");
    if (!reward.allFinite()) throw ValidationError("mdp: non-finite rewards");
}

OracleQ value_iteration(const TabularMdp& mdp, double tol, int max_iter) {
    mdp.validate();
    OracleQ out;
    out.q = Eigen::MatrixXd::Zero(mdp.n_states, 2);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd v = out.q.rowwise().maxCoeff();
        Eigen::MatrixXd next(mdp.n_states, 2);
        for (int a = 0; a < 2; ++a)
            next.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.p[a] * v);
        out.residual = (next - out.q).cwiseAbs().maxCoeff();
        out.q = next;
        out.iterations = it + 1;
        if (out.residual <= tol) return out;
    }
    throw ComputeError("value_iteration: max_iter exceeded, residual " +
                       std::to_string(out.residual));
}

Eigen::VectorXd exact_policy_value(const TabularMdp& mdp,
                                   const Eigen::MatrixXd& policy,
                                   double gamma) {
    mdp.validate();
    if (policy.rows() != mdp.n_states || policy.cols() != 2)
        throw ValidationError("policy shape mismatch");

    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(mdp.n_states);
    for (int a = 0; a < 2; ++a) {
        p_pi += policy.col(a).asDiagonal() * mdp.p[a];
        r_pi += policy.col(a).cwiseProduct(mdp.reward.col(a));
    }
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - gamma * p_pi;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible())
        throw ComputeError("exact_policy_value: singular Bellman system");
    return lu.solve(r_pi);
}

Eigen::VectorXd finite_horizon_policy_value(const TabularMdp& mdp,
                                            const Eigen::MatrixXd& policy,
                                            double gamma, int horizon) {
    mdp.validate();
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(mdp.n_states);
    for (int a = 0; a < 2; ++a) {
        p_pi += policy.col(a).asDiagonal() * mdp.p[a];
        r_pi += policy.col(a).cwiseProduct(mdp.reward.col(a));
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);
    for (int t = 0; t < horizon; ++t) v = r_pi + gamma * (p_pi * v);
    return v;
}

TabularMdp small_chain_mdp() {
    TabularMdp mdp;
    mdp.n_states = 3;
    mdp.gamma = 0.9;
    // action 0 stays put, action 1 advances; state 2 is absorbing and pays 1
    Eigen::MatrixXd stay = Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd advance = Eigen::MatrixXd::Zero(3, 3);
    advance(0, 1) = 1.0;
    advance(1, 2) = 1.0;
    advance(2, 2) = 1.0;
    mdp.p = {stay, advance};
    mdp.reward = Eigen::MatrixXd::Zero(3, 2);
    mdp.reward(2, 0) = 1.0;
    mdp.reward(2, 1) = 1.0;
    return mdp;
}

TabularMdp regime_mdp(double gamma) {
    // states: 0 speaking, 1 pausing, 2 post-utterance; dynamics are the
    // speaker's regime chain sampled at 0.25 s and do not depend on the
    // listener's action
    TabularMdp mdp;
    mdp.n_states = 3;
    mdp.gamma = gamma;
    Eigen::MatrixXd p(3, 3);
    p << 0.9375, 0.0, 0.0625,   // speaking mostly continues, then post
         0.1667, 0.8333, 0.0,   // pausing returns to speaking
         0.0, 0.125, 0.875;     // post-utterance decays into pausing
    // renormalize exactly
    for (int s = 0; s < 3; ++s) p.row(s) /= p.row(s).sum();
    mdp.p = {p, p};
    mdp.reward.resize(3, 2);
    // laughing in the post-utterance regime boosts engagement; elsewhere
    // it interrupts and pays less than staying quiet
    mdp.reward << 0.20, 0.05,
                  0.20, 0.10,
                  0.20, 1.00;
    return mdp;
}

namespace {

Eigen::VectorXd one_hot(int i, int n) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v[i] = 1.0;
    return v;
}

int deterministic_successor(const Eigen::MatrixXd& p, int s) {
    int best = 0;
    p.row(s).maxCoeff(&best);
    return best;
}

int sample_row(const Eigen::MatrixXd& p, int s, Rng& rng) {
    double u = rng.uniform();
    for (int j = 0; j < p.cols(); ++j) {
        u -= p(s, j);
        if (u < 0.0) return j;
    }
    return static_cast<int>(p.cols()) - 1;
}

}  // namespace

TupleDataset exhaustive_batch(const TabularMdp& mdp, int repeats) {
    mdp.validate();
    TupleDatasetBuilder builder(mdp.n_states);
    builder.add_session_meta({"exhaustive", "oracle", Participant::A, false});
    std::vector<std::uint32_t> cols(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s)
        cols[s] = builder.add_state(one_hot(s, mdp.n_states));
    std::uint32_t frame = 0;
    for (int rep = 0; rep < repeats; ++rep)
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < 2; ++a)
                builder.add_transition(
                    cols[s], cols[deterministic_successor(mdp.p[a], s)],
                    static_cast<std::uint8_t>(a),
                    static_cast<float>(mdp.reward(s, a)), 0, frame++);
    return builder.build();
}

SimulatedBatch simulate_trajectories(const TabularMdp& mdp,
                                     const Eigen::MatrixXd& behavior_policy,
                                     int n_trajectories, int horizon,
                                     std::uint64_t seed) {
    mdp.validate();
    if (behavior_policy.rows() != mdp.n_states || behavior_policy.cols() != 2)
        throw ValidationError("behavior policy shape mismatch");

    Rng rng = make_rng(seed);
    TupleDatasetBuilder builder(mdp.n_states);
    std::vector<std::uint32_t> cols(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s)
        cols[s] = builder.add_state(one_hot(s, mdp.n_states));

    SimulatedBatch out;
    std::size_t next_start = 0;
    for (int i = 0; i < n_trajectories; ++i) {
        const std::uint32_t sess = builder.add_session_meta(
            {"rollout-" + std::to_string(i), "sim", Participant::A, false});
        int s = static_cast<int>(rng.index(mdp.n_states));
        for (int t = 0; t < horizon; ++t) {
            const int a = rng.uniform() < behavior_policy(s, 1) ? 1 : 0;
            const int s_next = sample_row(mdp.p[a], s, rng);
            builder.add_transition(cols[s], cols[s_next],
                                   static_cast<std::uint8_t>(a),
                                   static_cast<float>(mdp.reward(s, a)), sess,
                                   static_cast<std::uint32_t>(t));
            s = s_next;
        }
        out.trajectories.push_back({next_start, horizon});
        next_start += static_cast<std::size_t>(horizon);
    }
    out.data = builder.build();
    return out;
}

PolicySpec tabular_policy_spec(const Eigen::MatrixXd& policy,
                               const std::string& tag) {
    PolicySpec spec;
    spec.tag = tag;
    auto state_index = [](const Eigen::VectorXd& s) {
        int i = 0;
        s.maxCoeff(&i);
        return i;
    };
    spec.prob = [policy, state_index](const Eigen::VectorXd& s) {
        return Eigen::Vector2d(policy.row(state_index(s)));
    };
    spec.prob_batch = [policy, state_index](const Eigen::MatrixXd& states) {
        Eigen::MatrixXd out(2, states.cols());
        for (long i = 0; i < states.cols(); ++i)
            out.col(i) = policy.row(state_index(states.col(i))).transpose();
        return out;
    };
    return spec;
}

Eigen::MatrixXd soften_tabular_greedy(const Eigen::MatrixXd& q, double p) {
    Eigen::MatrixXd policy(q.rows(), 2);
    for (long s = 0; s < q.rows(); ++s) {
        const int greedy = q(s, 1) > q(s, 0) ? 1 : 0;
        policy(s, greedy) = p;
        policy(s, 1 - greedy) = 1.0 - p;
    }
    return policy;
}

void SynthConfig::validate() const {
    if (n_sessions <= 0) throw ValidationError("synth: n_sessions must be positive");
    if (session_s <= 2.0) throw ValidationError("synth: session too short");
    if (sessions_per_pair <= 0)
        throw ValidationError("synth: sessions_per_pair must be positive");
    for (double r : {laugh_rate_speaking, laugh_rate_pausing, laugh_rate_post})
        if (r < 0.0 || r > 1.0)
            throw ValidationError("synth: laugh rates must lie in [0, 1]");
    for (double d : {dwell_speaking_s, dwell_pausing_s, dwell_post_s})
        if (d <= 0.0) throw ValidationError("synth: dwell times must be > 0");
    if (feature_noise_sd < 0.0)
        throw ValidationError("synth: feature_noise_sd must be >= 0");
}

std::uint64_t SynthConfig::hash() const {
    std::string s;
    for (double v :
         {static_cast<double>(n_sessions), session_s,
          static_cast<double>(sessions_per_pair), static_cast<double>(seed),
          dwell_speaking_s, dwell_pausing_s, dwell_post_s, laugh_rate_speaking,
          laugh_rate_pausing, laugh_rate_post, laugh_mean_s,
          static_cast<double>(ce_boost_events), feature_noise_sd})
        s += std::to_string(v) + "|";
    return fnv1a(s);
}

namespace {

enum Regime { kSpeaking = 0, kPausing = 1, kPost = 2 };

struct RegimeSpan {
    Regime regime;
    double start, end;
};

std::vector<RegimeSpan> regime_chain(const SynthConfig& cfg, double duration,
                                     Rng& rng) {
    const double dwell[3] = {cfg.dwell_speaking_s, cfg.dwell_pausing_s,
                             cfg.dwell_post_s};
    std::vector<RegimeSpan> spans;
    auto regime = static_cast<Regime>(rng.index(3));
    double t = 0.0;
    while (t < duration) {
        const double len = std::max(0.2, rng.exponential(dwell[regime]));
        spans.push_back({regime, t, std::min(t + len, duration)});
        t += len;
        // speaking -> post-utterance -> pausing -> speaking
        regime = regime == kSpeaking ? kPost
                 : regime == kPost   ? kPausing
                                     : kSpeaking;
    }
    return spans;
}

Regime regime_at(const std::vector<RegimeSpan>& spans, double t) {
    for (const auto& s : spans)
        if (t >= s.start && t < s.end) return s.regime;
    return spans.back().regime;
}

/// Mean base-feature vector per regime: first 16 dims (13 MFCC +
/// intensity + pitch + confidence); differences are computed afterwards.
Eigen::VectorXd regime_mean(Regime r) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(16);
    switch (r) {
        case kSpeaking:
            m.segment(0, 6).setConstant(1.5);
            m[13] = -20.0;
            m[14] = 180.0;
            m[15] = 0.7;
            break;
        case kPausing:
            m.segment(0, 6).setConstant(-1.5);
            m[13] = -60.0;
            m[14] = 0.0;
            m[15] = 0.1;
            break;
        case kPost:
            m.segment(6, 7).setConstant(1.5);
            m[13] = -40.0;
            m[14] = 120.0;
            m[15] = 0.4;
            break;
    }
    return m;
}

struct ParticipantTrack {
    std::vector<RegimeSpan> spans;
    std::vector<EventAnnotation> annotations;  // turns + gaze, this speaker
    std::vector<BaseFeatureFrame> frames;
};

ParticipantTrack make_speaker_track(const SynthConfig& cfg, Participant who,
                                    double duration, Rng& rng) {
    ParticipantTrack track;
    track.spans = regime_chain(cfg, duration, rng);

    for (const auto& s : track.spans)
        if (s.regime == kSpeaking && s.end - s.start > 0.05)
            track.annotations.push_back(
                {AnnotationKind::turn, BackchannelKind::laugh, who, s.start,
                 s.end});

    // gaze alternates on/off
    double t = rng.uniform(0.0, 2.0);
    while (t < duration) {
        const double on = std::max(0.3, rng.exponential(5.0));
        const double end = std::min(t + on, duration);
        if (end - t > 0.05)
            track.annotations.push_back({AnnotationKind::gaze_at_partner,
                                         BackchannelKind::laugh, who, t, end});
        t = end + std::max(0.3, rng.exponential(2.0));
    }

    // 40 Hz base features from the regime means
    const auto n_ticks = static_cast<std::size_t>(duration * kFrameRateHz);
    const double dt = 1.0 / kFrameRateHz;
    const Eigen::VectorXd means[3] = {regime_mean(kSpeaking),
                                      regime_mean(kPausing),
                                      regime_mean(kPost)};
    const double sd[16] = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5,
                           0.5, 0.5, 0.5, 0.5, 0.5, 2.0, 10.0, 0.1};
    track.frames.resize(n_ticks);
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(16);
    for (std::size_t k = 0; k < n_ticks; ++k) {
        const double tk = static_cast<double>(k) * dt;
        const auto r = regime_at(track.spans, tk);
        Eigen::VectorXd raw(16);
        for (int d = 0; d < 16; ++d)
            raw[d] = means[r][d] + cfg.feature_noise_sd * sd[d] * rng.normal();
        raw[14] = std::max(0.0, raw[14]);
        raw[15] = std::clamp(raw[15], 0.0, 1.0);

        auto& f = track.frames[k];
        f.mfcc = raw.head<13>();
        f.intensity_db = raw[13];
        f.pitch_hz = raw[14];
        f.pitch_confidence = raw[15];
        f.timestamp = tk;
        if (k > 0) {
            f.d_intensity = raw[13] - prev[13];
            f.d_pitch = raw[14] - prev[14];
            f.d_confidence = raw[15] - prev[15];
        }
        prev = raw;
    }
    return track;
}

/// Listener laughs driven by the speaker's regime; returns the laugh
/// annotations of `listener` plus any engagement-boost backchannels
/// credited to the speaker.
std::vector<EventAnnotation> make_laughs(const SynthConfig& cfg,
                                         Participant listener,
                                         Participant speaker,
                                         const ParticipantTrack& speaker_track,
                                         double duration, Rng& rng) {
    const double dt = 1.0 / kFrameRateHz;
    const double rate[3] = {cfg.laugh_rate_speaking, cfg.laugh_rate_pausing,
                            cfg.laugh_rate_post};
    std::vector<EventAnnotation> anns;
    double busy_until = 0.0;
    for (double t = 0.0; t < duration; t += dt) {
        if (t < busy_until) continue;
        const auto r = regime_at(speaker_track.spans, t);
        if (rng.uniform() >= rate[r] * dt) continue;
        const double len =
            std::clamp(rng.exponential(cfg.laugh_mean_s), 0.2, 3.0);
        const double end = std::min(t + len, duration);
        if (end - t <= 0.05) continue;
        anns.push_back({AnnotationKind::backchannel, BackchannelKind::laugh,
                        listener, t, end});
        busy_until = end + 0.5;

        if (r == kPost) {
            // well-timed laugh: the speaker acknowledges, raising CE density
            for (int e = 0; e < cfg.ce_boost_events; ++e) {
                const double bs = t + 0.3 * (e + 1);
                if (bs + 0.3 < duration)
                    anns.push_back({AnnotationKind::backchannel,
                                    e % 2 == 0 ? BackchannelKind::smile
                                               : BackchannelKind::nod,
                                    speaker, bs, bs + 0.3});
            }
        }
    }
    return anns;
}

struct SessionRaw {
    std::string session_id;
    std::string pair_id;
    std::vector<StateVector> states_a;
    std::vector<StateVector> states_b;
    std::vector<EventAnnotation> annotations;
};

SessionRaw make_session(const SynthConfig& config, int index) {
    Rng rng = make_rng(config.seed).child(static_cast<std::uint64_t>(index));
    SessionRaw raw;
    raw.session_id = "session" + std::to_string(index);
    raw.pair_id = "pair" + std::to_string(index / config.sessions_per_pair);

    auto track_a =
        make_speaker_track(config, Participant::A, config.session_s, rng);
    auto track_b =
        make_speaker_track(config, Participant::B, config.session_s, rng);

    raw.annotations = track_a.annotations;
    raw.annotations.insert(raw.annotations.end(), track_b.annotations.begin(),
                           track_b.annotations.end());
    // B laughs at A's speech and vice versa
    auto laughs_b = make_laughs(config, Participant::B, Participant::A, track_a,
                                config.session_s, rng);
    auto laughs_a = make_laughs(config, Participant::A, Participant::B, track_b,
                                config.session_s, rng);
    raw.annotations.insert(raw.annotations.end(), laughs_b.begin(),
                           laughs_b.end());
    raw.annotations.insert(raw.annotations.end(), laughs_a.begin(),
                           laughs_a.end());
    std::stable_sort(raw.annotations.begin(), raw.annotations.end(),
                     [](const EventAnnotation& x, const EventAnnotation& y) {
                         return x.start < y.start;
                     });

    raw.states_a = state_stream(track_a.frames);
    raw.states_b = state_stream(track_b.frames);
    return raw;
}

}  // namespace

void generate_corpus(const SynthConfig& config, const std::string& out_dir) {
    config.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    nlohmann::json manifest;
    manifest["format"] = "bcgen-corpus v1";
    manifest["seed"] = config.seed;
    manifest["config_hash"] = hex64(config.hash());
    manifest["sessions"] = nlohmann::json::array();

    for (int s = 0; s < config.n_sessions; ++s) {
        SessionRaw raw = make_session(config, s);
        const fs::path dir = fs::path(out_dir) / raw.session_id;
        fs::create_directories(dir);
        write_feature_csv((dir / "features_A.csv").string(), raw.states_a,
                          config.hash());
        write_feature_csv((dir / "features_B.csv").string(), raw.states_b,
                          config.hash());
        write_annotations_jsonl((dir / "annotations.jsonl").string(),
                                raw.annotations);
        manifest["sessions"].push_back({{"session_id", raw.session_id},
                                        {"subject_pair_id", raw.pair_id},
                                        {"duration_s", config.session_s}});
    }

    std::ofstream out(fs::path(out_dir) / "corpus.json");
    if (!out) throw ComputeError("cannot write corpus manifest");
    out << manifest.dump(2) << "\n";
}

TupleDataset build_synthetic_dataset(const SynthConfig& config, bool augment,
                                     RewardWindow align) {
    config.validate();
    TupleDatasetBuilder builder(kStateDim, config.hash());
    for (int s = 0; s < config.n_sessions; ++s) {
        SessionRaw raw = make_session(config, s);
        SessionRecord rec = make_session_record(
            raw.session_id, raw.pair_id, Participant::A,
            std::move(raw.states_a), std::move(raw.states_b), raw.annotations,
            config.session_s, align);
        builder.add_session(rec);
        if (augment) builder.add_session(swap_roles(rec), true);
    }
    return builder.build();
}

}  // namespace bcgen
