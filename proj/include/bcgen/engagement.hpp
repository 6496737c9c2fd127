#ifndef BCGEN_ENGAGEMENT_HPP
#define BCGEN_ENGAGEMENT_HPP

#include <string>
#include <vector>

namespace bcgen {

constexpr double kPaceWindowS = 15.0;
constexpr double kPaceWindowFloorS = 1.0;
constexpr double kAdjacencyMaxGapS = 1.0;
constexpr double kMutualGazeMinOverlapS = 0.1;

enum class Participant { A, B };

enum class BackchannelKind { laugh, smile, nod, headshake };

enum class AnnotationKind { gaze_at_partner, turn, backchannel };

/// One annotated interval from the corpus: a gaze-at-partner span, a
/// speaking turn, or a backchannel.
struct EventAnnotation {
    AnnotationKind kind;
    BackchannelKind subkind = BackchannelKind::laugh;  // backchannel only
    Participant participant;
    double start = 0.0;
    double end = 0.0;
};

enum class CeKind { mutual_facial_gaze, adjacency_pair, backchannel };

struct ConnectionEvent {
    CeKind kind;
    double time;
};

/// Reward stream at the 40 Hz tick rate.
struct PaceSeries {
    std::vector<double> rewards;
    double window_s = kPaceWindowS;
};

/// Window alignment for the pace reward. Trailing ends at the decision
/// instant; leading starts there.
enum class RewardWindow { trailing, leading };

/// Derives the sorted connection-event stream from annotations:
/// mutual-gaze overlap starts, adjacency pairs (speaker change within
/// kAdjacencyMaxGapS after a turn ends), and backchannel starts.
/// Overlapping same-speaker turns are a validation error.
std::vector<ConnectionEvent> extract_connection_events(
    const std::vector<EventAnnotation>& annotations);

/// CEs per second in the window at t: count / w_eff, where the window is
/// truncated at the session boundary and w_eff is floored at 1 s.
/// Equals 1/MTBCE.
double pace_at(const std::vector<ConnectionEvent>& ces, double t,
               double window_s = kPaceWindowS, double session_start = 0.0,
               RewardWindow align = RewardWindow::trailing,
               double session_end = -1.0);

/// Pace evaluated at every tick k/frame_rate for k in [0, n_frames).
PaceSeries reward_series(const std::vector<ConnectionEvent>& ces,
                         std::size_t n_frames, double frame_rate = 40.0,
                         double window_s = kPaceWindowS,
                         double session_start = 0.0,
                         RewardWindow align = RewardWindow::trailing,
                         double session_end = -1.0);

/// Annotation file I/O: JSONL, one object per event with fields
/// kind, subkind (backchannels only), participant, start, end.
std::vector<EventAnnotation> read_annotations_jsonl(const std::string& path);
void write_annotations_jsonl(const std::string& path,
                             const std::vector<EventAnnotation>& annotations);

void write_reward_csv(const std::string& path, const PaceSeries& series,
                      double frame_rate = 40.0);

}  // namespace bcgen

#endif
