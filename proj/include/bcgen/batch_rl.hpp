#ifndef BCGEN_BATCH_RL_HPP
#define BCGEN_BATCH_RL_HPP

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "bcgen/common.hpp"
#include "bcgen/dataset.hpp"
#include "bcgen/qnet.hpp"

namespace bcgen {

enum class Algorithm { nfq, batch_dqn };

struct TrainConfig {
    double gamma = 0.99;
    double lr = 1e-4;
    int minibatch = 512;
    int epochs = 20;
    int target_sync = 1000;       // gradient updates between target syncs
    std::size_t buffer_capacity = 50000;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double max_grad_norm = 0.0;   // 0 disables clipping
    std::uint64_t seed = 1;
    Algorithm algorithm = Algorithm::batch_dqn;
    std::vector<int> dims;        // empty: default topology for the data dim

    void validate() const;
    std::uint64_t hash() const;
};

struct TrainReport {
    std::vector<double> residual_history;  // one entry per epoch
    QParams params;
    double wall_clock_s = 0.0;
    TrainConfig config;
};

/// Argmax over the two Q-values; exact ties resolve to action 0.
std::uint8_t greedy_action(const QParams& params, const Eigen::VectorXd& state);

/// Mean squared Bellman-optimality violation over the given transitions
/// (all transitions when `subset` is empty).
double bellman_residual(const QParams& params, const TupleDataset& data,
                        double gamma,
                        const std::vector<std::size_t>& subset = {});

/// ε decayed exponentially per epoch from eps_start to eps_end over
/// `epochs` epochs; monotone nonincreasing, ε(epochs-1) == eps_end.
double epsilon_at(int epoch, int epochs, double eps_start, double eps_end);

/// FIFO replay buffer over transition indices.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(std::size_t transition_index);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    std::size_t sample(Rng& rng) const;
    const std::deque<std::size_t>& items() const { return items_; }

private:
    std::size_t capacity_;
    std::deque<std::size_t> items_;
};

/// Pushes each sampled transition that agrees with the current ε-greedy
/// policy: with probability ε the logged action is accepted outright,
/// otherwise it must match the greedy action of `params` at s. Returns
/// the number of accepted transitions.
std::size_t filter_insert(ReplayBuffer& buffer,
                          const std::vector<std::size_t>& sampled,
                          const TupleDataset& data, const QParams& params,
                          double eps, Rng& rng);

/// Neural fitted Q-iteration: per epoch, freeze TD targets computed with
/// the current network over the whole training set, then regress onto
/// them with minibatch Adam.
TrainReport nfq_train(const TupleDataset& data, const TrainConfig& config,
                      const std::vector<std::size_t>& subset = {});

/// Batch-DQN: policy-filtered replay buffer + periodically synced target
/// network.
TrainReport batch_dqn_train(const TupleDataset& data,
                            const TrainConfig& config,
                            const std::vector<std::size_t>& subset = {});

TrainReport train(const TupleDataset& data, const TrainConfig& config,
                  const std::vector<std::size_t>& subset = {});

void write_train_report_json(const TrainReport& report,
                             const std::string& path);

}  // namespace bcgen

#endif
