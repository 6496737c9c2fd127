#include "bcgen/batch_rl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

namespace bcgen {

void TrainConfig::validate() const {
    if (gamma < 0.0 || gamma >= 1.0)
        throw ValidationError("gamma must lie in [0, 1)");
    if (lr <= 0.0) throw ValidationError("lr must be positive");
    if (minibatch <= 0) throw ValidationError("minibatch must be positive");
    if (epochs <= 0) throw ValidationError("epochs must be positive");
    if (target_sync <= 0) throw ValidationError("target_sync must be positive");
    if (buffer_capacity == 0)
        throw ValidationError("buffer_capacity must be positive");
    if (eps_start < eps_end || eps_end < 0.0 || eps_start > 1.0)
        throw ValidationError("need 0 <= eps_end <= eps_start <= 1");
    if (max_grad_norm < 0.0)
        throw ValidationError("max_grad_norm must be nonnegative");
}

std::uint64_t TrainConfig::hash() const {
    std::string s = "g" + std::to_string(gamma) + "lr" + std::to_string(lr) +
                    "mb" + std::to_string(minibatch) + "ep" +
                    std::to_string(epochs) + "C" + std::to_string(target_sync) +
                    "cap" + std::to_string(buffer_capacity) + "e0" +
                    std::to_string(eps_start) + "e1" + std::to_string(eps_end) +
                    "gc" + std::to_string(max_grad_norm) + "seed" +
                    std::to_string(seed) + "alg" +
                    std::to_string(static_cast<int>(algorithm));
    for (int d : dims) s += "d" + std::to_string(d);
    return fnv1a(s);
}

std::uint8_t greedy_action(const QParams& params,
                           const Eigen::VectorXd& state) {
    const Eigen::VectorXd q = forward_one(params, state);
    return q[1] > q[0] ? 1 : 0;
}

namespace {

constexpr double kDivergenceGuard = 1e6;
constexpr long kForwardChunk = 8192;

/// Q-values for every state in the pool, evaluated in chunks.
Eigen::MatrixXd forward_pool(const QParams& params,
                             const Eigen::MatrixXf& pool) {
    Eigen::MatrixXd q(params.output_dim(), pool.cols());
    for (long c0 = 0; c0 < pool.cols(); c0 += kForwardChunk) {
        const long n = std::min(kForwardChunk, pool.cols() - c0);
        const Eigen::MatrixXd chunk = pool.middleCols(c0, n).cast<double>();
        q.middleCols(c0, n) = forward(params, chunk);
    }
    return q;
}

std::vector<std::size_t> full_subset(const TupleDataset& data) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

Eigen::MatrixXd gather_states(const TupleDataset& data,
                              const std::vector<std::size_t>& trans_idx,
                              bool next) {
    Eigen::MatrixXd out(data.state_dim(),
                        static_cast<long>(trans_idx.size()));
    for (std::size_t i = 0; i < trans_idx.size(); ++i) {
        const Transition& t = data[trans_idx[i]];
        out.col(static_cast<long>(i)) =
            data.state_pool().col(next ? t.s_next : t.s).cast<double>();
    }
    return out;
}

void clip_gradients(GradientBundle& g, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (std::size_t l = 0; l < g.dW.size(); ++l)
        sq += g.dW[l].squaredNorm() + g.db[l].squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (std::size_t l = 0; l < g.dW.size(); ++l) {
            g.dW[l] *= scale;
            g.db[l] *= scale;
        }
    }
}

QParams init_for(const TupleDataset& data, const TrainConfig& config) {
    std::vector<int> dims = config.dims;
    if (dims.empty()) dims = default_qnet_dims(data.state_dim());
    if (dims.front() != data.state_dim())
        throw ValidationError("network input dim " +
                              std::to_string(dims.front()) +
                              " does not match state dim " +
                              std::to_string(data.state_dim()));
    return init_qnet(config.seed, dims);
}

void check_divergence(double residual) {
    if (!std::isfinite(residual) || residual > kDivergenceGuard)
        throw ComputeError("training diverged: Bellman residual " +
                           std::to_string(residual));
}

}  // namespace

double bellman_residual(const QParams& params, const TupleDataset& data,
                        double gamma, const std::vector<std::size_t>& subset) {
    if (data.empty()) throw ComputeError("empty dataset");
    const Eigen::MatrixXd q = forward_pool(params, data.state_pool());
    const auto residual_of = [&](const Transition& t) {
        const double target =
            static_cast<double>(t.r) + gamma * q.col(t.s_next).maxCoeff();
        const double diff = q(t.a, t.s) - target;
        return diff * diff;
    };
    double acc = 0.0;
    if (subset.empty()) {
        for (const auto& t : data.transitions()) acc += residual_of(t);
        return acc / static_cast<double>(data.size());
    }
    for (std::size_t i : subset) acc += residual_of(data[i]);
    return acc / static_cast<double>(subset.size());
}

double epsilon_at(int epoch, int epochs, double eps_start, double eps_end) {
    if (epochs <= 1 || eps_start <= eps_end) return eps_end;
    const double rate = std::log(eps_start / eps_end) / (epochs - 1);
    const double e = eps_start * std::exp(-rate * epoch);
    return std::max(e, eps_end);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("buffer capacity must be positive");
}

void ReplayBuffer::push(std::size_t transition_index) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(transition_index);
}

std::size_t ReplayBuffer::sample(Rng& rng) const {
    if (items_.empty()) throw ComputeError("sampling from empty replay buffer");
    return items_[rng.index(items_.size())];
}

std::size_t filter_insert(ReplayBuffer& buffer,
                          const std::vector<std::size_t>& sampled,
                          const TupleDataset& data, const QParams& params,
                          double eps, Rng& rng) {
    if (eps < 0.0 || eps > 1.0) throw ValidationError("eps must lie in [0, 1]");
    if (sampled.empty()) return 0;
    const Eigen::MatrixXd q =
        forward(params, gather_states(data, sampled, /*next=*/false));
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
        const Transition& t = data[sampled[i]];
        const bool take_batch_action = rng.uniform() < eps;
        const std::uint8_t greedy =
            q(1, static_cast<long>(i)) > q(0, static_cast<long>(i)) ? 1 : 0;
        if (take_batch_action || t.a == greedy) {
            buffer.push(sampled[i]);
            ++accepted;
        }
    }
    return accepted;
}

TrainReport nfq_train(const TupleDataset& data, const TrainConfig& config,
                      const std::vector<std::size_t>& subset) {
    config.validate();
    if (data.empty()) throw ComputeError("empty dataset");
    const auto t_start = std::chrono::steady_clock::now();

    std::vector<std::size_t> idx = subset.empty() ? full_subset(data) : subset;
    QParams params = init_for(data, config);
    AdamState adam = AdamState::for_params(params);
    Rng rng = make_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

    TrainReport report;
    report.config = config;

    std::vector<double> targets(idx.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // frozen TD targets from the current network, over the full set
        const Eigen::MatrixXd q_all = forward_pool(params, data.state_pool());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const Transition& t = data[idx[i]];
            targets[i] = static_cast<double>(t.r) +
                         config.gamma * q_all.col(t.s_next).maxCoeff();
        }

        // one shuffled minibatch pass of regression onto the targets
        std::vector<std::size_t> order(idx.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.index(i)]);

        const std::size_t m = static_cast<std::size_t>(config.minibatch);
        for (std::size_t off = 0; off < order.size(); off += m) {
            const std::size_t n = std::min(m, order.size() - off);
            Eigen::MatrixXd states(data.state_dim(), static_cast<long>(n));
            std::vector<std::uint8_t> actions(n);
            Eigen::VectorXd batch_targets(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = order[off + i];
                const Transition& t = data[idx[j]];
                states.col(static_cast<long>(i)) =
                    data.state_pool().col(t.s).cast<double>();
                actions[i] = t.a;
                batch_targets[static_cast<long>(i)] = targets[j];
            }
            auto res = backward(params, states, actions, batch_targets);
            clip_gradients(res.grads, config.max_grad_norm);
            adam_step(params, adam, res.grads, config.lr);
        }

        const double br = bellman_residual(params, data, config.gamma, idx);
        check_divergence(br);
        report.residual_history.push_back(br);
    }

    report.params = std::move(params);
    report.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();
    return report;
}

TrainReport batch_dqn_train(const TupleDataset& data,
                            const TrainConfig& config,
                            const std::vector<std::size_t>& subset) {
    config.validate();
    if (data.empty()) throw ComputeError("empty dataset");
    const auto t_start = std::chrono::steady_clock::now();

    std::vector<std::size_t> idx = subset.empty() ? full_subset(data) : subset;
    QParams params = init_for(data, config);
    QParams target = params;
    AdamState adam = AdamState::for_params(params);
    Rng rng = make_rng(config.seed ^ 0xd1b54a32d192ed03ull);
    ReplayBuffer buffer(config.buffer_capacity);

    TrainReport report;
    report.config = config;

    const std::size_t m = static_cast<std::size_t>(config.minibatch);
    const std::size_t steps_per_epoch = (idx.size() + m - 1) / m;
    std::uint64_t updates = 0;

    std::vector<std::size_t> sampled(m), train_idx(m);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double eps =
            epsilon_at(epoch, config.epochs, config.eps_start, config.eps_end);
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            for (std::size_t i = 0; i < m; ++i)
                sampled[i] = idx[rng.index(idx.size())];
            filter_insert(buffer, sampled, data, params, eps, rng);
            if (buffer.empty()) {
                // cold start: admit the batch actions unconditionally once
                filter_insert(buffer, sampled, data, params, 1.0, rng);
            }

            for (std::size_t i = 0; i < m; ++i)
                train_idx[i] = buffer.sample(rng);
            Eigen::MatrixXd states = gather_states(data, train_idx, false);
            Eigen::MatrixXd next_states = gather_states(data, train_idx, true);
            const Eigen::MatrixXd q_next = forward(target, next_states);
            std::vector<std::uint8_t> actions(m);
            Eigen::VectorXd targets(static_cast<long>(m));
            for (std::size_t i = 0; i < m; ++i) {
                const Transition& t = data[train_idx[i]];
                actions[i] = t.a;
                targets[static_cast<long>(i)] =
                    static_cast<double>(t.r) +
                    config.gamma * q_next.col(static_cast<long>(i)).maxCoeff();
            }
            auto res = backward(params, states, actions, targets);
            clip_gradients(res.grads, config.max_grad_norm);
            adam_step(params, adam, res.grads, config.lr);
            ++updates;
            if (updates % static_cast<std::uint64_t>(config.target_sync) == 0)
                target = params;
        }

        const double br = bellman_residual(params, data, config.gamma, idx);
        check_divergence(br);
        report.residual_history.push_back(br);
    }

    report.params = std::move(params);
    report.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();
    return report;
}

TrainReport train(const TupleDataset& data, const TrainConfig& config,
                  const std::vector<std::size_t>& subset) {
    return config.algorithm == Algorithm::nfq
               ? nfq_train(data, config, subset)
               : batch_dqn_train(data, config, subset);
}

void write_train_report_json(const TrainReport& report,
                             const std::string& path) {
    nlohmann::json j;
    j["residual_history"] = report.residual_history;
    j["final_residual"] = report.residual_history.empty()
                              ? nullptr
                              : nlohmann::json(report.residual_history.back());
    j["config"] = {
        {"algorithm",
         report.config.algorithm == Algorithm::nfq ? "nfq" : "batch-dqn"},
        {"gamma", report.config.gamma},
        {"lr", report.config.lr},
        {"minibatch", report.config.minibatch},
        {"epochs", report.config.epochs},
        {"target_sync", report.config.target_sync},
        {"buffer_capacity", report.config.buffer_capacity},
        {"eps_start", report.config.eps_start},
        {"eps_end", report.config.eps_end},
        {"seed", report.config.seed},
    };
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace bcgen
