#ifndef BCGEN_CORPUS_HPP
#define BCGEN_CORPUS_HPP

#include <string>
#include <vector>

#include "bcgen/dataset.hpp"
#include "bcgen/engagement.hpp"
#include "bcgen/features.hpp"

namespace bcgen {

struct CorpusSessionEntry {
    std::string session_id;
    std::string subject_pair_id;
    double duration_s = 0.0;
};

struct CorpusManifest {
    std::vector<CorpusSessionEntry> sessions;
    std::uint64_t config_hash = 0;
};

CorpusManifest read_corpus_manifest(const std::string& corpus_dir);

/// Aligns both participants' state streams with actions (the listener's
/// laughs) and pace rewards into one record. env_participant is the
/// speaker whose features become the states.
SessionRecord make_session_record(
    const std::string& session_id, const std::string& subject_pair_id,
    Participant env_participant, std::vector<StateVector> states_env,
    std::vector<StateVector> states_partner,
    const std::vector<EventAnnotation>& annotations, double duration_s,
    RewardWindow align = RewardWindow::trailing);

/// Loads one session (features_A.csv, features_B.csv under features_dir/
/// <session>/, annotations.jsonl under annotations_dir/<session>/) into a
/// record with env_participant = A. The two directories may be the same
/// corpus root.
SessionRecord load_session(const std::string& features_dir,
                           const std::string& annotations_dir,
                           const CorpusSessionEntry& entry,
                           RewardWindow align = RewardWindow::trailing);

struct CorpusBuildResult {
    TupleDataset data;
    std::vector<std::pair<std::string, std::size_t>> per_session_counts;
};

/// Full corpus -> tuple dataset, optionally doubled by role swap. The
/// corpus manifest (corpus.json) is read from features_dir.
CorpusBuildResult build_dataset_from_corpus(
    const std::string& features_dir, const std::string& annotations_dir,
    bool augment, RewardWindow align = RewardWindow::trailing);

/// Laugh intervals of one participant from an annotation stream.
std::vector<std::pair<double, double>> laugh_intervals_of(
    const std::vector<EventAnnotation>& annotations, Participant who);

}  // namespace bcgen

#endif
