#include "bcgen/engagement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "bcgen/common.hpp"

namespace bcgen {

namespace {

using Interval = std::pair<double, double>;

/// Union of intervals, merged and sorted.
std::vector<Interval> merge_intervals(std::vector<Interval> xs) {
    std::sort(xs.begin(), xs.end());
    std::vector<Interval> out;
    for (const auto& iv : xs) {
        if (!out.empty() && iv.first <= out.back().second)
            out.back().second = std::max(out.back().second, iv.second);
        else
            out.push_back(iv);
    }
    return out;
}

std::vector<Interval> intersect(const std::vector<Interval>& a,
                                const std::vector<Interval>& b) {
    std::vector<Interval> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double lo = std::max(a[i].first, b[j].first);
        const double hi = std::min(a[i].second, b[j].second);
        if (lo < hi) out.emplace_back(lo, hi);
        if (a[i].second < b[j].second)
            ++i;
        else
            ++j;
    }
    return out;
}

}  // namespace

std::vector<ConnectionEvent> extract_connection_events(
    const std::vector<EventAnnotation>& annotations) {
    std::vector<Interval> gaze_a, gaze_b;
    std::vector<EventAnnotation> turns;
    std::vector<ConnectionEvent> ces;

    for (const auto& ann : annotations) {
        if (ann.start >= ann.end)
            throw ValidationError("annotation with start >= end");
        switch (ann.kind) {
            case AnnotationKind::gaze_at_partner:
                (ann.participant == Participant::A ? gaze_a : gaze_b)
                    .emplace_back(ann.start, ann.end);
                break;
            case AnnotationKind::turn:
                turns.push_back(ann);
                break;
            case AnnotationKind::backchannel:
                ces.push_back({CeKind::backchannel, ann.start});
                break;
        }
    }

    // Overlapping turns by the same speaker are malformed annotations.
    for (Participant p : {Participant::A, Participant::B}) {
        std::vector<Interval> own;
        for (const auto& t : turns)
            if (t.participant == p) own.emplace_back(t.start, t.end);
        std::sort(own.begin(), own.end());
        for (std::size_t i = 1; i < own.size(); ++i)
            if (own[i].first < own[i - 1].second)
                throw ValidationError("overlapping turns for one speaker");
    }

    for (const auto& iv : intersect(merge_intervals(gaze_a),
                                    merge_intervals(gaze_b)))
        if (iv.second - iv.first >= kMutualGazeMinOverlapS)
            ces.push_back({CeKind::mutual_facial_gaze, iv.first});

    // Adjacency pair: a turn starting within (0, g_max] after the latest
    // earlier end of an other-speaker turn.
    for (const auto& t : turns) {
        double prev_end = -1.0;
        bool found = false;
        for (const auto& u : turns) {
            if (u.participant == t.participant) continue;
            if (u.end <= t.start && (!found || u.end > prev_end)) {
                prev_end = u.end;
                found = true;
            }
        }
        if (found) {
            const double gap = t.start - prev_end;
            if (gap > 0.0 && gap <= kAdjacencyMaxGapS)
                ces.push_back({CeKind::adjacency_pair, t.start});
        }
    }

    std::sort(ces.begin(), ces.end(),
              [](const ConnectionEvent& x, const ConnectionEvent& y) {
                  if (x.time != y.time) return x.time < y.time;
                  return static_cast<int>(x.kind) < static_cast<int>(y.kind);
              });
    return ces;
}

double pace_at(const std::vector<ConnectionEvent>& ces, double t,
               double window_s, double session_start, RewardWindow align,
               double session_end) {
    if (t < session_start)
        throw ValidationError("pace_at: t before session start");

    double lo, hi, w_eff;
    if (align == RewardWindow::trailing) {
        w_eff = std::min(window_s, t - session_start);
        w_eff = std::max(w_eff, kPaceWindowFloorS);
        lo = t - w_eff;
        hi = t;
    } else {
        w_eff = window_s;
        if (session_end >= 0.0) w_eff = std::min(window_s, session_end - t);
        w_eff = std::max(w_eff, kPaceWindowFloorS);
        lo = t;
        hi = t + w_eff;
    }

    std::size_t count = 0;
    for (const auto& ce : ces) {
        const bool in = (align == RewardWindow::trailing)
                            ? (ce.time > lo && ce.time <= hi)
                            : (ce.time >= lo && ce.time < hi);
        if (in) ++count;
    }
    return static_cast<double>(count) / w_eff;
}

PaceSeries reward_series(const std::vector<ConnectionEvent>& ces,
                         std::size_t n_frames, double frame_rate,
                         double window_s, double session_start,
                         RewardWindow align, double session_end) {
    if (n_frames == 0) throw ValidationError("reward_series: n_frames == 0");
    PaceSeries series;
    series.window_s = window_s;
    series.rewards.resize(n_frames);
    for (std::size_t k = 0; k < n_frames; ++k) {
        const double t = session_start + static_cast<double>(k) / frame_rate;
        series.rewards[k] =
            pace_at(ces, t, window_s, session_start, align, session_end);
    }
    return series;
}

namespace {

const char* participant_name(Participant p) {
    return p == Participant::A ? "A" : "B";
}

Participant parse_participant(const std::string& s) {
    if (s == "A") return Participant::A;
    if (s == "B") return Participant::B;
    throw ValidationError("unknown participant: " + s);
}

const char* subkind_name(BackchannelKind k) {
    switch (k) {
        case BackchannelKind::laugh: return "laugh";
        case BackchannelKind::smile: return "smile";
        case BackchannelKind::nod: return "nod";
        case BackchannelKind::headshake: return "headshake";
    }
    return "laugh";
}

BackchannelKind parse_subkind(const std::string& s) {
    if (s == "laugh") return BackchannelKind::laugh;
    if (s == "smile") return BackchannelKind::smile;
    if (s == "nod") return BackchannelKind::nod;
    if (s == "headshake") return BackchannelKind::headshake;
    throw ValidationError("unknown backchannel subkind: " + s);
}

}  // namespace

std::vector<EventAnnotation> read_annotations_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open annotation file: " + path);
    std::vector<EventAnnotation> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " +
                                  e.what());
        }
        EventAnnotation ann;
        const std::string kind = j.at("kind");
        if (kind == "gaze_at_partner")
            ann.kind = AnnotationKind::gaze_at_partner;
        else if (kind == "turn")
            ann.kind = AnnotationKind::turn;
        else if (kind == "backchannel") {
            ann.kind = AnnotationKind::backchannel;
            ann.subkind = parse_subkind(j.at("subkind"));
        } else
            throw ValidationError(path + ": unknown annotation kind: " + kind);
        ann.participant = parse_participant(j.at("participant"));
        ann.start = j.at("start");
        ann.end = j.at("end");
        out.push_back(ann);
    }
    return out;
}

void write_annotations_jsonl(const std::string& path,
                             const std::vector<EventAnnotation>& annotations) {
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot open for writing: " + path);
    for (const auto& ann : annotations) {
        nlohmann::json j;
        switch (ann.kind) {
            case AnnotationKind::gaze_at_partner:
                j["kind"] = "gaze_at_partner";
                break;
            case AnnotationKind::turn:
                j["kind"] = "turn";
                break;
            case AnnotationKind::backchannel:
                j["kind"] = "backchannel";
                j["subkind"] = subkind_name(ann.subkind);
                break;
        }
        j["participant"] = participant_name(ann.participant);
        j["start"] = ann.start;
        j["end"] = ann.end;
        out << j.dump() << "\n";
    }
    if (!out) throw ComputeError("write failed: " + path);
}

void write_reward_csv(const std::string& path, const PaceSeries& series,
                      double frame_rate) {
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot open for writing: " + path);
    out << "timestamp,reward\n";
    out.precision(17);
    for (std::size_t k = 0; k < series.rewards.size(); ++k)
        out << static_cast<double>(k) / frame_rate << ','
            << series.rewards[k] << "\n";
    if (!out) throw ComputeError("write failed: " + path);
}

}  // namespace bcgen
