#ifndef BCGEN_SYNTH_HPP
#define BCGEN_SYNTH_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bcgen/common.hpp"
#include "bcgen/dataset.hpp"
#include "bcgen/ope.hpp"

namespace bcgen {

/// Finite MDP with two actions, used only as ground truth for the
/// learners and the OPE estimator.
struct TabularMdp {
    int n_states = 0;
    std::vector<Eigen::MatrixXd> p;  // p[a](s, s') transition probabilities
    Eigen::MatrixXd reward;          // n_states x 2, r(s, a)
    double gamma = 0.99;

    void validate() const;
};

struct OracleQ {
    Eigen::MatrixXd q;  // n_states x 2
    double residual = 0.0;
    int iterations = 0;
};

/// Value iteration to sup-norm residual <= tol.
OracleQ value_iteration(const TabularMdp& mdp, double tol = 1e-10,
                        int max_iter = 1000000);

/// Exact V^pi from the linear Bellman-expectation system.
/// policy is n_states x 2 (row-stochastic).
Eigen::VectorXd exact_policy_value(const TabularMdp& mdp,
                                   const Eigen::MatrixXd& policy,
                                   double gamma);

/// Exact expected discounted return of the first `horizon` steps.
Eigen::VectorXd finite_horizon_policy_value(const TabularMdp& mdp,
                                            const Eigen::MatrixXd& policy,
                                            double gamma, int horizon);

/// A 3-state deterministic chain with hand-checkable geometric-sum
/// Q-values (gamma = 0.9).
TabularMdp small_chain_mdp();

/// The 3-regime backchannel MDP used by the pipeline tests: states are
/// conversation regimes (speaking / pausing / post-utterance), action 1
/// is "laugh", and laughing in the post-utterance regime pays off.
TabularMdp regime_mdp(double gamma = 0.99);

/// Exhaustive one-sample-per-(s,a) batch of a deterministic MDP, encoded
/// with one-hot states, `repeats` copies of each pair.
TupleDataset exhaustive_batch(const TabularMdp& mdp, int repeats = 1);

/// Rollouts from a tabular behavior policy, encoded as a TupleDataset of
/// one-hot states plus the trajectory index, for OPE calibration.
struct SimulatedBatch {
    TupleDataset data;
    std::vector<OpeTrajectory> trajectories;
};
SimulatedBatch simulate_trajectories(const TabularMdp& mdp,
                                     const Eigen::MatrixXd& behavior_policy,
                                     int n_trajectories, int horizon,
                                     std::uint64_t seed);

/// PolicySpec over one-hot tabular states.
PolicySpec tabular_policy_spec(const Eigen::MatrixXd& policy,
                               const std::string& tag);

/// Softened greedy policy of a tabular Q table: greedy action gets p.
Eigen::MatrixXd soften_tabular_greedy(const Eigen::MatrixXd& q, double p);

/// Synthetic dyadic corpus configuration. Stands in for a licensed
/// conversation corpus; emits the same file formats as the real
/// ingestion path.
struct SynthConfig {
    int n_sessions = 20;
    double session_s = 300.0;
    int sessions_per_pair = 4;
    std::uint64_t seed = 1;

    // regime dwell-time means (seconds): speaking, pausing, post-utterance
    double dwell_speaking_s = 4.0;
    double dwell_pausing_s = 1.5;
    double dwell_post_s = 2.0;

    // listener laugh-start rates per second, by the speaker's regime
    double laugh_rate_speaking = 0.02;
    double laugh_rate_pausing = 0.05;
    double laugh_rate_post = 0.6;
    double laugh_mean_s = 0.8;

    // engagement rule: extra partner backchannels after a well-timed laugh
    int ce_boost_events = 2;

    double feature_noise_sd = 0.5;

    void validate() const;
    std::uint64_t hash() const;
};

/// Writes corpus/<session>/features_{A,B}.csv + annotations.jsonl and a
/// top-level corpus.json manifest. Deterministic in the seed.
void generate_corpus(const SynthConfig& config, const std::string& out_dir);

/// Same corpus content assembled directly into a tuple dataset, skipping
/// the file round-trip.
TupleDataset build_synthetic_dataset(const SynthConfig& config,
                                     bool augment = true,
                                     RewardWindow align =
                                         RewardWindow::trailing);

}  // namespace bcgen

#endif
