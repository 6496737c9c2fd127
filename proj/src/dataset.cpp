#include "bcgen/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>

#include "bcgen/common.hpp"

namespace bcgen {

std::vector<std::uint8_t> label_actions(
    const std::vector<std::pair<double, double>>& laugh_intervals,
    std::size_t n_frames, double frame_rate, double t0) {
    for (const auto& iv : laugh_intervals)
        if (iv.first >= iv.second)
            throw ValidationError("laugh interval with start >= end");
    std::vector<std::uint8_t> actions(n_frames, 0);
    for (std::size_t k = 0; k < n_frames; ++k) {
        const double t = t0 + static_cast<double>(k) / frame_rate;
        for (const auto& iv : laugh_intervals)
            if (t >= iv.first && t < iv.second) {
                actions[k] = 1;
                break;
            }
    }
    return actions;
}

bool can_swap_roles(const SessionRecord& session) {
    return !session.partner_states.empty() &&
           session.partner_states.size() == session.states.size() &&
           session.partner_actions.size() == session.actions.size();
}

SessionRecord swap_roles(const SessionRecord& session) {
    if (!can_swap_roles(session))
        throw ValidationError("swap_roles: partner channel missing for session " +
                              session.session_id);
    SessionRecord out = session;
    out.env_participant = session.env_participant == Participant::A
                              ? Participant::B
                              : Participant::A;
    out.states = session.partner_states;
    out.actions = session.partner_actions;
    out.partner_states = session.states;
    out.partner_actions = session.actions;
    // Pace counts both parties' connection events, so the reward stream is
    // identical under the flipped perspective.
    out.rewards = session.rewards;
    return out;
}

TupleDatasetBuilder::TupleDatasetBuilder(int state_dim,
                                         std::uint64_t config_hash)
    : state_dim_(state_dim), config_hash_(config_hash) {
    if (state_dim <= 0) throw ValidationError("state_dim must be positive");
}

std::uint32_t TupleDatasetBuilder::add_state(const Eigen::VectorXd& s) {
    if (s.size() != state_dim_)
        throw ValidationError("state dimension mismatch");
    states_.push_back(s.cast<float>());
    return static_cast<std::uint32_t>(states_.size() - 1);
}

void TupleDatasetBuilder::add_transition(std::uint32_t s, std::uint32_t s_next,
                                         std::uint8_t a, float r,
                                         std::uint32_t session,
                                         std::uint32_t frame) {
    if (s >= states_.size() || s_next >= states_.size())
        throw ValidationError("transition references unknown state");
    if (a > 1) throw ValidationError("action must be 0 or 1");
    transitions_.push_back({s, s_next, a, r, session, frame});
}

std::uint32_t TupleDatasetBuilder::add_session_meta(const SessionMeta& meta) {
    sessions_.push_back(meta);
    return static_cast<std::uint32_t>(sessions_.size() - 1);
}

std::size_t TupleDatasetBuilder::add_session(const SessionRecord& session,
                                             bool role_swapped) {
    const std::size_t n = session.states.size();
    if (session.actions.size() != n || session.rewards.size() != n)
        throw ValidationError("session " + session.session_id +
                              ": states/actions/rewards lengths differ");
    const std::uint32_t sess = add_session_meta(
        {session.session_id, session.subject_pair_id, session.env_participant,
         role_swapped});
    if (n < 2) {
        std::cerr << "warning: session " << session.session_id
                  << " has fewer than 2 state frames, no tuples\n";
        return 0;
    }
    std::vector<std::uint32_t> cols(n);
    for (std::size_t i = 0; i < n; ++i)
        cols[i] = add_state(session.states[i].values);
    for (std::size_t t = 0; t + 1 < n; ++t)
        add_transition(cols[t], cols[t + 1], session.actions[t],
                       static_cast<float>(session.rewards[t + 1]), sess,
                       static_cast<std::uint32_t>(t));
    return n - 1;
}

TupleDataset TupleDatasetBuilder::build() {
    if (built_) throw ValidationError("dataset already built");
    built_ = true;
    TupleDataset d;
    d.states_.resize(state_dim_, static_cast<long>(states_.size()));
    for (std::size_t i = 0; i < states_.size(); ++i)
        d.states_.col(static_cast<long>(i)) = states_[i];
    d.transitions_ = std::move(transitions_);
    d.sessions_ = std::move(sessions_);
    d.config_hash_ = config_hash_;
    return d;
}

namespace {

constexpr char kMagic[8] = {'B', 'C', 'T', 'D', 'S', 'E', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ValidationError("dataset file truncated");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<long>(s.size()));
}

std::string get_string(std::istream& in) {
    auto n = get<std::uint32_t>(in);
    if (n > (1u << 20)) throw ValidationError("dataset file corrupt");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw ValidationError("dataset file truncated");
    return s;
}

}  // namespace

TupleDataset TupleDataset::standardized() const {
    TupleDataset out = *this;
    for (long d = 0; d < out.states_.rows(); ++d) {
        auto row = out.states_.row(d);
        row.array() -= row.mean();
        const float sd = std::sqrt(row.array().square().mean());
        if (sd > 0.0f) row /= sd;
    }
    return out;
}

void TupleDataset::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ComputeError("cannot open for writing: " + path);
    out.write(kMagic, sizeof kMagic);
    put(out, kFormatVersion);
    put(out, config_hash_);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(states_.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(states_.cols()));
    put<std::uint64_t>(out, transitions_.size());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(sessions_.size()));
    for (const auto& s : sessions_) {
        put_string(out, s.session_id);
        put_string(out, s.subject_pair_id);
        put<std::uint8_t>(out, s.env_participant == Participant::A ? 0 : 1);
        put<std::uint8_t>(out, s.role_swapped ? 1 : 0);
    }
    out.write(reinterpret_cast<const char*>(states_.data()),
              static_cast<long>(sizeof(float) * states_.size()));
    for (const auto& t : transitions_) {
        put(out, t.s);
        put(out, t.s_next);
        put(out, t.a);
        put(out, t.r);
        put(out, t.session);
        put(out, t.frame);
    }
    if (!out) throw ComputeError("write failed: " + path);
}

TupleDataset TupleDataset::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ValidationError(path + ": not a tuple dataset file");
    const auto version = get<std::uint32_t>(in);
    if (version != kFormatVersion)
        throw ValidationError(path + ": unsupported format version " +
                              std::to_string(version));
    TupleDataset d;
    d.config_hash_ = get<std::uint64_t>(in);
    const auto dim = get<std::uint32_t>(in);
    const auto n_states = get<std::uint64_t>(in);
    const auto n_trans = get<std::uint64_t>(in);
    const auto n_sessions = get<std::uint32_t>(in);
    d.sessions_.resize(n_sessions);
    for (auto& s : d.sessions_) {
        s.session_id = get_string(in);
        s.subject_pair_id = get_string(in);
        s.env_participant = get<std::uint8_t>(in) == 0 ? Participant::A
                                                       : Participant::B;
        s.role_swapped = get<std::uint8_t>(in) != 0;
    }
    d.states_.resize(dim, static_cast<long>(n_states));
    in.read(reinterpret_cast<char*>(d.states_.data()),
            static_cast<long>(sizeof(float) * d.states_.size()));
    if (!in) throw ValidationError(path + ": truncated state pool");
    d.transitions_.resize(n_trans);
    for (auto& t : d.transitions_) {
        t.s = get<std::uint32_t>(in);
        t.s_next = get<std::uint32_t>(in);
        t.a = get<std::uint8_t>(in);
        t.r = get<float>(in);
        t.session = get<std::uint32_t>(in);
        t.frame = get<std::uint32_t>(in);
        if (t.s >= n_states || t.s_next >= n_states)
            throw ValidationError(path + ": transition references unknown state");
    }
    return d;
}

FoldSplit loso_split(const std::vector<SessionMeta>& sessions) {
    std::set<std::string> pairs;
    for (const auto& s : sessions) pairs.insert(s.subject_pair_id);
    if (pairs.size() < 2)
        throw ValidationError("loso_split: need at least 2 distinct subject pairs");

    FoldSplit split;
    split.pair_ids.assign(pairs.begin(), pairs.end());
    split.test_sessions.resize(split.pair_ids.size());
    split.train_sessions.resize(split.pair_ids.size());
    for (std::size_t f = 0; f < split.pair_ids.size(); ++f) {
        for (std::uint32_t i = 0; i < sessions.size(); ++i) {
            if (sessions[i].subject_pair_id == split.pair_ids[f])
                split.test_sessions[f].push_back(i);
            else
                split.train_sessions[f].push_back(i);
        }
    }
    return split;
}

std::vector<std::size_t> transitions_for_sessions(
    const TupleDataset& data, const std::vector<std::uint32_t>& session_ids) {
    std::set<std::uint32_t> wanted(session_ids.begin(), session_ids.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (wanted.count(data[i].session)) out.push_back(i);
    return out;
}

}  // namespace bcgen
