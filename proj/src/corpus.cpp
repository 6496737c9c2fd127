#include "bcgen/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "bcgen/common.hpp"

namespace bcgen {

CorpusManifest read_corpus_manifest(const std::string& corpus_dir) {
    namespace fs = std::filesystem;
    const fs::path path = fs::path(corpus_dir) / "corpus.json";
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open corpus manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "bcgen-corpus v1")
        throw ValidationError(path.string() + ": unknown corpus format");
    CorpusManifest m;
    if (j.contains("config_hash"))
        m.config_hash =
            std::stoull(j["config_hash"].get<std::string>(), nullptr, 16);
    for (const auto& s : j.at("sessions"))
        m.sessions.push_back({s.at("session_id"), s.at("subject_pair_id"),
                              s.at("duration_s")});
    return m;
}

std::vector<std::pair<double, double>> laugh_intervals_of(
    const std::vector<EventAnnotation>& annotations, Participant who) {
    std::vector<std::pair<double, double>> out;
    for (const auto& a : annotations)
        if (a.kind == AnnotationKind::backchannel &&
            a.subkind == BackchannelKind::laugh && a.participant == who)
            out.emplace_back(a.start, a.end);
    return out;
}

SessionRecord make_session_record(
    const std::string& session_id, const std::string& subject_pair_id,
    Participant env_participant, std::vector<StateVector> states_env,
    std::vector<StateVector> states_partner,
    const std::vector<EventAnnotation>& annotations, double duration_s,
    RewardWindow align) {
    if (!states_partner.empty() &&
        states_partner.size() != states_env.size())
        throw ValidationError(session_id +
                              ": participant state streams differ in length");
    if (states_env.empty())
        throw ValidationError(session_id + ": no state frames");

    const Participant listener = env_participant == Participant::A
                                     ? Participant::B
                                     : Participant::A;
    const auto ces = extract_connection_events(annotations);
    const double t0 = states_env.front().timestamp;
    const std::size_t n = states_env.size();

    SessionRecord rec;
    rec.session_id = session_id;
    rec.subject_pair_id = subject_pair_id;
    rec.env_participant = env_participant;
    rec.states = std::move(states_env);
    rec.actions =
        label_actions(laugh_intervals_of(annotations, listener), n,
                      kFrameRateHz, t0);
    rec.rewards.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        rec.rewards[k] = pace_at(ces, rec.states[k].timestamp, kPaceWindowS,
                                 0.0, align, duration_s);
    if (!states_partner.empty()) {
        rec.partner_states = std::move(states_partner);
        rec.partner_actions =
            label_actions(laugh_intervals_of(annotations, env_participant), n,
                          kFrameRateHz, t0);
    }
    return rec;
}

SessionRecord load_session(const std::string& features_dir,
                           const std::string& annotations_dir,
                           const CorpusSessionEntry& entry,
                           RewardWindow align) {
    namespace fs = std::filesystem;
    const fs::path fdir = fs::path(features_dir) / entry.session_id;
    const fs::path adir = fs::path(annotations_dir) / entry.session_id;
    auto states_a = read_feature_csv((fdir / "features_A.csv").string());
    std::vector<StateVector> states_b;
    if (fs::exists(fdir / "features_B.csv"))
        states_b = read_feature_csv((fdir / "features_B.csv").string());
    auto annotations =
        read_annotations_jsonl((adir / "annotations.jsonl").string());
    return make_session_record(entry.session_id, entry.subject_pair_id,
                               Participant::A, std::move(states_a),
                               std::move(states_b), annotations,
                               entry.duration_s, align);
}

CorpusBuildResult build_dataset_from_corpus(const std::string& features_dir,
                                            const std::string& annotations_dir,
                                            bool augment, RewardWindow align) {
    const CorpusManifest manifest = read_corpus_manifest(features_dir);
    if (manifest.sessions.empty())
        throw ValidationError("corpus has no sessions");

    CorpusBuildResult result;
    TupleDatasetBuilder builder(kStateDim, manifest.config_hash);
    for (const auto& entry : manifest.sessions) {
        SessionRecord rec =
            load_session(features_dir, annotations_dir, entry, align);
        std::size_t count = builder.add_session(rec);
        if (augment) {
            if (can_swap_roles(rec)) {
                count += builder.add_session(swap_roles(rec), true);
            } else {
                std::cerr << "warning: session " << entry.session_id
                          << " lacks a second channel; augmentation skipped\n";
            }
        }
        result.per_session_counts.emplace_back(entry.session_id, count);
    }
    result.data = builder.build();
    return result;
}

}  // namespace bcgen
