#ifndef BCGEN_DATASET_HPP
#define BCGEN_DATASET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bcgen/engagement.hpp"
#include "bcgen/features.hpp"

namespace bcgen {

/// Per-session time series at the state tick rate: states of the
/// environment speaker, the agent's binary backchannel actions, and the
/// pace rewards, all aligned index-for-index. partner_* carry the data
/// needed for role-swap augmentation and may be empty.
struct SessionRecord {
    std::string session_id;
    std::string subject_pair_id;
    Participant env_participant = Participant::A;
    std::vector<StateVector> states;
    std::vector<std::uint8_t> actions;
    std::vector<double> rewards;
    std::vector<StateVector> partner_states;
    std::vector<std::uint8_t> partner_actions;
};

/// a_t = 1 iff tick t/frame_rate falls inside the union of [start, end)
/// intervals.
std::vector<std::uint8_t> label_actions(
    const std::vector<std::pair<double, double>>& laugh_intervals,
    std::size_t n_frames, double frame_rate = 40.0, double t0 = 0.0);

/// Flips environment and behavior roles. Requires partner data; throws
/// ValidationError if it is missing. Involution: swap(swap(x)) == x.
SessionRecord swap_roles(const SessionRecord& session);

bool can_swap_roles(const SessionRecord& session);

struct SessionMeta {
    std::string session_id;
    std::string subject_pair_id;
    Participant env_participant = Participant::A;
    bool role_swapped = false;
};

/// One logged ⟨s, a, r, s'⟩. States live in the dataset's shared pool;
/// s and s_next are column indices into it.
struct Transition {
    std::uint32_t s = 0;
    std::uint32_t s_next = 0;
    std::uint8_t a = 0;
    float r = 0.0f;
    std::uint32_t session = 0;
    std::uint32_t frame = 0;
};

class TupleDatasetBuilder;

/// Immutable batch of transitions plus the shared state pool. States are
/// stored as 32-bit floats (the on-disk precision); accessors widen to
/// double.
class TupleDataset {
public:
    int state_dim() const { return static_cast<int>(states_.rows()); }
    std::size_t n_states() const { return static_cast<std::size_t>(states_.cols()); }
    std::size_t size() const { return transitions_.size(); }
    bool empty() const { return transitions_.empty(); }

    const std::vector<Transition>& transitions() const { return transitions_; }
    const Transition& operator[](std::size_t i) const { return transitions_[i]; }
    const std::vector<SessionMeta>& sessions() const { return sessions_; }
    std::uint64_t config_hash() const { return config_hash_; }

    Eigen::VectorXd state(std::uint32_t col) const {
        return states_.col(col).cast<double>();
    }
    const Eigen::MatrixXf& state_pool() const { return states_; }

    /// Copy with the state pool z-scored per dimension (population std).
    /// Dimensions with zero spread are centered only. Enabled by the
    /// normalize_features config flag; training and evaluation must agree
    /// on it, which the config hash enforces.
    TupleDataset standardized() const;

    void save(const std::string& path) const;
    static TupleDataset load(const std::string& path);

private:
    friend class TupleDatasetBuilder;
    Eigen::MatrixXf states_;
    std::vector<Transition> transitions_;
    std::vector<SessionMeta> sessions_;
    std::uint64_t config_hash_ = 0;
};

/// Single-writer construction; build() freezes the dataset.
class TupleDatasetBuilder {
public:
    explicit TupleDatasetBuilder(int state_dim, std::uint64_t config_hash = 0);

    /// Appends one session's transitions: N aligned (state, action, reward)
    /// ticks become N-1 tuples (s_t, a_t, r_{t+1}, s_{t+1}). Returns the
    /// number of tuples added (0 with a warning to stderr when N < 2).
    std::size_t add_session(const SessionRecord& session,
                            bool role_swapped = false);

    /// Low-level append for synthetic/tabular batches.
    std::uint32_t add_state(const Eigen::VectorXd& s);
    void add_transition(std::uint32_t s, std::uint32_t s_next, std::uint8_t a,
                        float r, std::uint32_t session = 0,
                        std::uint32_t frame = 0);
    std::uint32_t add_session_meta(const SessionMeta& meta);

    TupleDataset build();

private:
    int state_dim_;
    std::uint64_t config_hash_;
    std::vector<Eigen::VectorXf> states_;
    std::vector<Transition> transitions_;
    std::vector<SessionMeta> sessions_;
    bool built_ = false;
};

/// Leave-one-subject-out folds: one fold per distinct subject pair, test
/// fold = that pair's sessions (role-swapped twins included).
struct FoldSplit {
    // fold k: session indices whose pair is the k-th distinct pair
    std::vector<std::vector<std::uint32_t>> test_sessions;
    std::vector<std::vector<std::uint32_t>> train_sessions;
    std::vector<std::string> pair_ids;

    std::size_t n_folds() const { return pair_ids.size(); }
};

FoldSplit loso_split(const std::vector<SessionMeta>& sessions);

/// Transition indices belonging to the given session set.
std::vector<std::size_t> transitions_for_sessions(
    const TupleDataset& data, const std::vector<std::uint32_t>& session_ids);

}  // namespace bcgen

#endif
