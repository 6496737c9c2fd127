#include "bcgen/ope.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>

#include "bcgen/common.hpp"
#include "bcgen/features.hpp"

namespace bcgen {

KnnBehaviorModel::KnnBehaviorModel(
    const TupleDataset& data, const std::vector<std::size_t>& transition_subset,
    int k, std::size_t max_reference, std::uint64_t subsample_seed)
    : k_(k) {
    std::vector<std::size_t> subset = transition_subset;
    if (subset.empty()) {
        subset.resize(data.size());
        std::iota(subset.begin(), subset.end(), std::size_t{0});
    }
    if (k <= 0) throw ValidationError("knn: k must be positive");
    if (static_cast<std::size_t>(k) > subset.size())
        throw ValidationError("knn: k exceeds dataset size");

    if (max_reference > 0 && subset.size() > max_reference) {
        // deterministic uniform subsample
        Rng rng = make_rng(subsample_seed ^ 0x6a09e667f3bcc909ull);
        for (std::size_t i = subset.size(); i > 1; --i)
            std::swap(subset[i - 1], subset[rng.index(i)]);
        subset.resize(max_reference);
        std::sort(subset.begin(), subset.end());
    }

    ref_.resize(data.state_dim(), static_cast<long>(subset.size()));
    actions_.resize(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const Transition& t = data[subset[i]];
        ref_.col(static_cast<long>(i)) = data.state_pool().col(t.s);
        actions_[i] = t.a;
    }
    ref_sqnorm_ = ref_.colwise().squaredNorm();
}

Eigen::MatrixXd KnnBehaviorModel::prob_batch(
    const Eigen::MatrixXd& queries) const {
    const long nq = queries.cols();
    const long nr = ref_.cols();
    Eigen::MatrixXd out(2, nq);
    const Eigen::MatrixXf qf = queries.cast<float>();

    constexpr long kChunk = 256;
    std::vector<std::pair<float, long>> order(static_cast<std::size_t>(nr));
    for (long q0 = 0; q0 < nq; q0 += kChunk) {
        const long n = std::min(kChunk, nq - q0);
        // squared distances via ||r||^2 - 2 r.q (query norm is constant per
        // column and does not affect the ranking)
        Eigen::MatrixXf dots = ref_.transpose() * qf.middleCols(q0, n);
        for (long j = 0; j < n; ++j) {
            for (long i = 0; i < nr; ++i)
                order[static_cast<std::size_t>(i)] = {
                    ref_sqnorm_[i] - 2.0f * dots(i, j), i};
            std::nth_element(order.begin(), order.begin() + (k_ - 1),
                             order.end());
            int count1 = 0;
            for (int i = 0; i < k_; ++i)
                count1 += actions_[static_cast<std::size_t>(order[i].second)];
            const double p1 = (count1 + 1.0) / (k_ + 2.0);
            out(0, q0 + j) = 1.0 - p1;
            out(1, q0 + j) = p1;
        }
    }
    return out;
}

Eigen::Vector2d KnnBehaviorModel::prob(const Eigen::VectorXd& state) const {
    return prob_batch(Eigen::MatrixXd(state)).col(0);
}

PolicySpec KnnBehaviorModel::as_policy() const {
    PolicySpec spec;
    spec.tag = "behavior_knn";
    spec.prob = [this](const Eigen::VectorXd& s) { return prob(s); };
    spec.prob_batch = [this](const Eigen::MatrixXd& s) {
        return prob_batch(s);
    };
    return spec;
}

PolicySpec soften_greedy(const QParams& params, double p) {
    if (p <= 0.5 || p >= 1.0)
        throw ValidationError("soften_greedy: p must lie in (0.5, 1)");
    PolicySpec spec;
    spec.tag = "softened_greedy";
    // copy params into the closures; the policy outlives the caller's net
    auto batch = [params, p](const Eigen::MatrixXd& states) {
        const Eigen::MatrixXd q = forward(params, states);
        Eigen::MatrixXd out(2, states.cols());
        for (long i = 0; i < states.cols(); ++i) {
            const int greedy = q(1, i) > q(0, i) ? 1 : 0;
            out(greedy, i) = p;
            out(1 - greedy, i) = 1.0 - p;
        }
        return out;
    };
    spec.prob_batch = batch;
    spec.prob = [batch](const Eigen::VectorXd& s) {
        return Eigen::Vector2d(batch(Eigen::MatrixXd(s)).col(0));
    };
    return spec;
}

PolicySpec uniform_policy() {
    PolicySpec spec;
    spec.tag = "uniform";
    spec.prob = [](const Eigen::VectorXd&) {
        return Eigen::Vector2d(0.5, 0.5);
    };
    spec.prob_batch = [](const Eigen::MatrixXd& s) {
        return Eigen::MatrixXd::Constant(2, s.cols(), 0.5);
    };
    return spec;
}

std::vector<OpeTrajectory> make_trajectories(
    const TupleDataset& data, int T, int shift,
    const std::vector<std::uint32_t>& session_filter) {
    if (T <= 0 || shift <= 0)
        throw ValidationError("make_trajectories: T and shift must be positive");
    std::vector<bool> wanted;
    if (!session_filter.empty()) {
        wanted.assign(data.sessions().size(), false);
        for (auto s : session_filter) wanted[s] = true;
    }

    std::vector<OpeTrajectory> out;
    std::size_t skipped_sessions = 0;
    std::size_t i = 0;
    const std::size_t n = data.size();
    while (i < n) {
        // find the maximal contiguous run of one session
        std::size_t j = i + 1;
        while (j < n && data[j].session == data[i].session &&
               data[j].frame == data[j - 1].frame + 1)
            ++j;
        const bool keep = wanted.empty() || wanted[data[i].session];
        if (keep) {
            const std::size_t run = j - i;
            if (run < static_cast<std::size_t>(T))
                ++skipped_sessions;
            else
                for (std::size_t s = i; s + T <= j;
                     s += static_cast<std::size_t>(shift))
                    out.push_back({s, T});
        }
        i = j;
    }
    if (skipped_sessions > 0)
        std::cerr << "note: " << skipped_sessions
                  << " session runs shorter than T contributed no trajectories\n";
    return out;
}

namespace {

/// Per-step probabilities of the logged actions for all transitions that
/// any trajectory touches, computed in one batch pass per policy.
struct StepProbs {
    // keyed by transition index
    std::map<std::size_t, double> pi, pi_b;
};

StepProbs logged_action_probs(const TupleDataset& data,
                              const std::vector<OpeTrajectory>& trajectories,
                              const PolicySpec& pi, const PolicySpec& pi_b) {
    std::vector<std::size_t> needed;
    for (const auto& tr : trajectories)
        for (int t = 0; t < tr.length; ++t) needed.push_back(tr.start + t);
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());

    Eigen::MatrixXd states(data.state_dim(), static_cast<long>(needed.size()));
    for (std::size_t i = 0; i < needed.size(); ++i)
        states.col(static_cast<long>(i)) =
            data.state_pool().col(data[needed[i]].s).cast<double>();

    const Eigen::MatrixXd p_pi = pi.prob_batch(states);
    const Eigen::MatrixXd p_pib = pi_b.prob_batch(states);

    StepProbs out;
    for (std::size_t i = 0; i < needed.size(); ++i) {
        const std::uint8_t a = data[needed[i]].a;
        const double pb = p_pib(a, static_cast<long>(i));
        if (pb < kProbFloor)
            throw ValidationError(
                "behavior probability " + std::to_string(pb) +
                " below floor; importance ratios would be unbounded");
        out.pi[needed[i]] = p_pi(a, static_cast<long>(i));
        out.pi_b[needed[i]] = pb;
    }
    return out;
}

}  // namespace

double step_wis(const TupleDataset& data,
                const std::vector<OpeTrajectory>& trajectories,
                const PolicySpec& pi, const PolicySpec& pi_b, double gamma) {
    if (trajectories.empty())
        throw ValidationError("step_wis: no trajectories");
    const int T = trajectories[0].length;
    for (const auto& tr : trajectories)
        if (tr.length != T)
            throw ValidationError("step_wis: trajectories of mixed length");

    const StepProbs probs = logged_action_probs(data, trajectories, pi, pi_b);
    const std::size_t n = trajectories.size();

    // cumulative log ratios, per trajectory per step
    Eigen::MatrixXd log_rho(static_cast<long>(n), T);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int t = 0; t < T; ++t) {
            const std::size_t idx = trajectories[i].start + t;
            acc += std::log(probs.pi.at(idx)) - std::log(probs.pi_b.at(idx));
            log_rho(static_cast<long>(i), t) = acc;
        }
    }

    double value = 0.0;
    double discount = 1.0;
    Eigen::VectorXd w(static_cast<long>(n));
    for (int t = 0; t < T; ++t) {
        const double mx = log_rho.col(t).maxCoeff();
        w = (log_rho.col(t).array() - mx).exp();
        const double wsum = w.sum();
        double step_val = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            step_val += w[static_cast<long>(i)] *
                        static_cast<double>(data[trajectories[i].start + t].r);
        value += discount * step_val / wsum;
        discount *= gamma;
    }
    return value;
}

double mc_return(const TupleDataset& data,
                 const std::vector<OpeTrajectory>& trajectories, double gamma) {
    if (trajectories.empty()) throw ValidationError("mc_return: no trajectories");
    double acc = 0.0;
    for (const auto& tr : trajectories) {
        double g = 0.0, d = 1.0;
        for (int t = 0; t < tr.length; ++t) {
            g += d * static_cast<double>(data[tr.start + t].r);
            d *= gamma;
        }
        acc += g;
    }
    return acc / static_cast<double>(trajectories.size());
}

std::vector<double> laugh_runs(const std::vector<std::uint8_t>& actions,
                               double frame_rate) {
    std::vector<double> durations;
    std::size_t run = 0;
    for (std::uint8_t a : actions) {
        if (a) {
            ++run;
        } else if (run > 0) {
            durations.push_back(static_cast<double>(run) / frame_rate);
            run = 0;
        }
    }
    if (run > 0) durations.push_back(static_cast<double>(run) / frame_rate);
    return durations;
}

DurationStats duration_stats(const std::vector<double>& durations) {
    if (durations.empty())
        throw ValidationError("duration_stats: empty duration list");
    Eigen::Map<const Eigen::VectorXd> v(durations.data(),
                                        static_cast<long>(durations.size()));
    const double mean = v.mean();
    const double var = (v.array() - mean).square().mean();
    Eigen::VectorXd sorted = v;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    return {mean, sorted[sorted.size() - 1], std::sqrt(var),
            quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)};
}

DurationHistogram DurationHistogram::from_durations(
    const std::vector<double>& durations) {
    const int n_bins = static_cast<int>(kHistMaxS / kHistBinWidth) + 1;  // +overflow
    DurationHistogram h;
    h.probs.assign(n_bins, 0.0);
    for (double d : durations) {
        int bin = static_cast<int>(d / kHistBinWidth);
        if (bin >= n_bins - 1) bin = n_bins - 1;
        h.probs[bin] += 1.0;
    }
    double total = 0.0;
    for (double& p : h.probs) {
        p += kHistSmoothing;
        total += p;
    }
    for (double& p : h.probs) p /= total;
    return h;
}

double symmetric_kl(const DurationHistogram& p, const DurationHistogram& q) {
    if (p.probs.size() != q.probs.size() || p.bin_width != q.bin_width)
        throw ValidationError("symmetric_kl: histogram binning mismatch");
    double kl_pq = 0.0, kl_qp = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        kl_pq += p.probs[i] * std::log(p.probs[i] / q.probs[i]);
        kl_qp += q.probs[i] * std::log(q.probs[i] / p.probs[i]);
    }
    return 0.5 * (kl_pq + kl_qp);
}

namespace {

std::vector<double> durations_from_channel(
    const TupleDataset& data, const std::vector<std::uint32_t>& session_filter,
    const std::function<std::uint8_t(std::size_t)>& action_at) {
    std::vector<bool> wanted;
    if (!session_filter.empty()) {
        wanted.assign(data.sessions().size(), false);
        for (auto s : session_filter) wanted[s] = true;
    }
    std::vector<double> out;
    std::vector<std::uint8_t> actions;
    std::size_t i = 0;
    while (i < data.size()) {
        std::size_t j = i + 1;
        while (j < data.size() && data[j].session == data[i].session &&
               data[j].frame == data[j - 1].frame + 1)
            ++j;
        if (wanted.empty() || wanted[data[i].session]) {
            actions.clear();
            for (std::size_t t = i; t < j; ++t)
                actions.push_back(action_at(t));
            auto runs = laugh_runs(actions);
            out.insert(out.end(), runs.begin(), runs.end());
        }
        i = j;
    }
    return out;
}

}  // namespace

std::vector<double> policy_rollout_durations(
    const QParams& params, const TupleDataset& data,
    const std::vector<std::uint32_t>& session_filter) {
    // batch-evaluate greedy actions for the whole pool once
    Eigen::VectorXi greedy(data.state_pool().cols());
    constexpr long kChunk = 8192;
    for (long c0 = 0; c0 < data.state_pool().cols(); c0 += kChunk) {
        const long n = std::min(kChunk, data.state_pool().cols() - c0);
        const Eigen::MatrixXd chunk =
            data.state_pool().middleCols(c0, n).cast<double>();
        const Eigen::MatrixXd q = forward(params, chunk);
        for (long i = 0; i < n; ++i)
            greedy[c0 + i] = q(1, i) > q(0, i) ? 1 : 0;
    }
    return durations_from_channel(data, session_filter, [&](std::size_t t) {
        return static_cast<std::uint8_t>(greedy[data[t].s]);
    });
}

std::vector<double> behavior_durations(
    const TupleDataset& data, const std::vector<std::uint32_t>& session_filter) {
    return durations_from_channel(data, session_filter,
                                  [&](std::size_t t) { return data[t].a; });
}

}  // namespace bcgen
