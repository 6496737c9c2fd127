#ifndef BCGEN_OPE_HPP
#define BCGEN_OPE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bcgen/dataset.hpp"
#include "bcgen/qnet.hpp"

namespace bcgen {

constexpr double kProbFloor = 0.01;
constexpr int kDefaultKnnK = 50;
constexpr int kDefaultHorizon = 100;
constexpr double kHistBinWidth = 0.25;
constexpr double kHistMaxS = 10.0;
constexpr double kHistSmoothing = 1e-6;

/// A stochastic mapping state -> (p(a=0|s), p(a=1|s)). prob_batch takes
/// one state per column and returns a 2 x n matrix of probabilities.
struct PolicySpec {
    std::string tag;
    std::function<Eigen::Vector2d(const Eigen::VectorXd&)> prob;
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> prob_batch;
};

/// Exact k-nearest-neighbor behavior-policy estimate over logged
/// (state, action) pairs with Euclidean distance and Laplace smoothing:
/// p(a|s) = (count_a + 1) / (k + 2).
class KnnBehaviorModel {
public:
    KnnBehaviorModel(const TupleDataset& data,
                     const std::vector<std::size_t>& transition_subset,
                     int k = kDefaultKnnK, std::size_t max_reference = 0,
                     std::uint64_t subsample_seed = 0);

    Eigen::MatrixXd prob_batch(const Eigen::MatrixXd& queries) const;
    Eigen::Vector2d prob(const Eigen::VectorXd& state) const;
    std::size_t reference_size() const { return actions_.size(); }

    PolicySpec as_policy() const;

private:
    Eigen::MatrixXf ref_;        // dim x n reference states
    Eigen::VectorXf ref_sqnorm_;
    std::vector<std::uint8_t> actions_;
    int k_;
};

/// The greedy policy of a Q-network softened so the greedy action gets
/// probability p (ties resolve to action 0).
PolicySpec soften_greedy(const QParams& params, double p = 0.9);

PolicySpec uniform_policy();

/// T consecutive (s, a, r) steps from one session: transition indices
/// start .. start+length-1 of the dataset, contiguous within a session.
struct OpeTrajectory {
    std::size_t start = 0;
    int length = 0;
};

/// Sliding windows of length T with the given shift, never crossing a
/// session boundary. Sessions shorter than T contribute nothing.
std::vector<OpeTrajectory> make_trajectories(const TupleDataset& data,
                                             int T = kDefaultHorizon,
                                             int shift = 1,
                                             const std::vector<std::uint32_t>&
                                                 session_filter = {});

/// Step-wise weighted importance sampling estimate of the value of `pi`
/// from trajectories logged under `pi_b`. Throws if any behavior
/// probability of a logged action falls below kProbFloor.
double step_wis(const TupleDataset& data,
                const std::vector<OpeTrajectory>& trajectories,
                const PolicySpec& pi, const PolicySpec& pi_b,
                double gamma = 0.99);

/// Plain Monte Carlo mean discounted return of the logged trajectories.
double mc_return(const TupleDataset& data,
                 const std::vector<OpeTrajectory>& trajectories,
                 double gamma = 0.99);

/// Maximal runs of 1s in a 40 Hz binary action stream, as durations in
/// seconds.
std::vector<double> laugh_runs(const std::vector<std::uint8_t>& actions,
                               double frame_rate = 40.0);

struct DurationStats {
    double mean;
    double max;
    double std_dev;
    double iqr;
};

/// Mean/max/std/IQR of a nonempty duration list (population std, linear
/// interpolation quantiles).
DurationStats duration_stats(const std::vector<double>& durations);

struct DurationHistogram {
    std::vector<double> probs;  // [0,10] in 0.25 s bins + one overflow bin
    double bin_width = kHistBinWidth;

    static DurationHistogram from_durations(
        const std::vector<double>& durations);
};

/// Jeffreys-symmetrized KL divergence between two smoothed histograms.
double symmetric_kl(const DurationHistogram& p, const DurationHistogram& q);

/// Greedy-policy laugh durations: applies argmax Q framewise over each
/// session's state stream and extracts runs.
std::vector<double> policy_rollout_durations(const QParams& params,
                                             const TupleDataset& data,
                                             const std::vector<std::uint32_t>&
                                                 session_filter = {});

/// Logged behavior laugh durations from the dataset's action channel.
std::vector<double> behavior_durations(const TupleDataset& data,
                                       const std::vector<std::uint32_t>&
                                           session_filter = {});

}  // namespace bcgen

#endif
