#include "bcgen/qnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "bcgen/common.hpp"

namespace bcgen {

std::vector<int> default_qnet_dims(int input_dim) {
    return {input_dim, 100, 25, 2};
}

std::size_t QParams::n_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < W.size(); ++l)
        n += static_cast<std::size_t>(W[l].size()) +
             static_cast<std::size_t>(b[l].size());
    return n;
}

bool QParams::same_shape(const QParams& o) const {
    if (W.size() != o.W.size()) return false;
    for (std::size_t l = 0; l < W.size(); ++l)
        if (W[l].rows() != o.W[l].rows() || W[l].cols() != o.W[l].cols())
            return false;
    return true;
}

QParams init_qnet(std::uint64_t seed, const std::vector<int>& dims) {
    if (dims.size() < 2) throw ValidationError("qnet needs at least 2 dims");
    for (int d : dims)
        if (d <= 0) throw ValidationError("qnet dims must be positive");

    Rng rng = make_rng(seed);
    QParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double bound = std::sqrt(6.0 / fan_in);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (long j = 0; j < w.cols(); ++j)
            for (long i = 0; i < w.rows(); ++i)
                w(i, j) = rng.uniform(-bound, bound);
        p.W.push_back(std::move(w));
        p.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return p;
}

GradientBundle GradientBundle::zeros_like(const QParams& p) {
    GradientBundle g;
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        g.dW.push_back(Eigen::MatrixXd::Zero(p.W[l].rows(), p.W[l].cols()));
        g.db.push_back(Eigen::VectorXd::Zero(p.b[l].size()));
    }
    return g;
}

Eigen::MatrixXd forward(const QParams& params, const Eigen::MatrixXd& states) {
    if (states.rows() != params.input_dim())
        throw ValidationError("forward: state dimension mismatch, expected " +
                              std::to_string(params.input_dim()) + " got " +
                              std::to_string(states.rows()));
    Eigen::MatrixXd h = states;
    const std::size_t L = params.n_layers();
    for (std::size_t l = 0; l < L; ++l) {
        h = (params.W[l] * h).colwise() + params.b[l];
        if (l + 1 < L) h = h.cwiseMax(0.0);
    }
    return h;
}

Eigen::VectorXd forward_one(const QParams& params,
                            const Eigen::VectorXd& state) {
    return forward(params, Eigen::MatrixXd(state)).col(0);
}

namespace {

inline double smooth_l1_scalar(double x) {
    const double ax = std::abs(x);
    return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

inline double smooth_l1_grad(double x) {
    if (x > 1.0) return 1.0;
    if (x < -1.0) return -1.0;
    return x;
}

}  // namespace

double smooth_l1(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
    if (pred.size() != target.size())
        throw ValidationError("smooth_l1: size mismatch");
    double acc = 0.0;
    for (long i = 0; i < pred.size(); ++i)
        acc += smooth_l1_scalar(pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

BackwardResult backward(const QParams& params, const Eigen::MatrixXd& states,
                        const std::vector<std::uint8_t>& actions,
                        const Eigen::VectorXd& targets) {
    const long n = states.cols();
    if (static_cast<long>(actions.size()) != n || targets.size() != n)
        throw ValidationError("backward: batch size mismatch");
    if (!targets.allFinite()) throw ValidationError("backward: non-finite targets");

    const std::size_t L = params.n_layers();

    // forward pass, keeping pre- and post-activation values
    std::vector<Eigen::MatrixXd> acts(L + 1);
    acts[0] = states;
    for (std::size_t l = 0; l < L; ++l) {
        acts[l + 1] = (params.W[l] * acts[l]).colwise() + params.b[l];
        if (l + 1 < L) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
    }

    const Eigen::MatrixXd& q = acts[L];
    double loss = 0.0;
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), n);
    for (long i = 0; i < n; ++i) {
        const double x = q(actions[i], i) - targets[i];
        loss += smooth_l1_scalar(x);
        delta(actions[i], i) = smooth_l1_grad(x) / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);

    BackwardResult res{GradientBundle::zeros_like(params), loss};
    for (std::size_t l = L; l-- > 0;) {
        res.grads.dW[l] = delta * acts[l].transpose();
        res.grads.db[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = params.W[l].transpose() * delta;
            // ReLU mask: hidden activations are zero exactly where clipped
            delta.array() *= (acts[l].array() > 0.0).cast<double>();
        }
    }
    return res;
}

AdamState AdamState::for_params(const QParams& p) {
    AdamState s;
    s.m = GradientBundle::zeros_like(p);
    s.v = GradientBundle::zeros_like(p);
    return s;
}

void adam_step(QParams& params, AdamState& adam, const GradientBundle& grads,
               double lr) {
    adam.step += 1;
    const double t = static_cast<double>(adam.step);
    const double bc1 = 1.0 - std::pow(adam.beta1, t);
    const double bc2 = 1.0 - std::pow(adam.beta2, t);
    for (std::size_t l = 0; l < params.W.size(); ++l) {
        adam.m.dW[l] = adam.beta1 * adam.m.dW[l] + (1.0 - adam.beta1) * grads.dW[l];
        adam.v.dW[l].array() = adam.beta2 * adam.v.dW[l].array() +
                               (1.0 - adam.beta2) * grads.dW[l].array().square();
        params.W[l].array() -=
            lr * (adam.m.dW[l].array() / bc1) /
            ((adam.v.dW[l].array() / bc2).sqrt() + adam.eps);

        adam.m.db[l] = adam.beta1 * adam.m.db[l] + (1.0 - adam.beta1) * grads.db[l];
        adam.v.db[l].array() = adam.beta2 * adam.v.db[l].array() +
                               (1.0 - adam.beta2) * grads.db[l].array().square();
        params.b[l].array() -=
            lr * (adam.m.db[l].array() / bc1) /
            ((adam.v.db[l].array() / bc2).sqrt() + adam.eps);
    }
}

namespace {
constexpr char kParamMagic[8] = {'B', 'C', 'Q', 'N', 'E', 'T', '0', '1'};
}

void save_params(const QParams& params, const std::string& path,
                 std::uint64_t config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ComputeError("cannot open for writing: " + path);
    out.write(kParamMagic, sizeof kParamMagic);
    const std::uint32_t n_layers = static_cast<std::uint32_t>(params.n_layers());
    out.write(reinterpret_cast<const char*>(&config_hash), sizeof config_hash);
    out.write(reinterpret_cast<const char*>(&n_layers), sizeof n_layers);
    for (std::size_t l = 0; l < params.W.size(); ++l) {
        const std::uint32_t rows = static_cast<std::uint32_t>(params.W[l].rows());
        const std::uint32_t cols = static_cast<std::uint32_t>(params.W[l].cols());
        out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
        out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
        out.write(reinterpret_cast<const char*>(params.W[l].data()),
                  static_cast<long>(sizeof(double) * params.W[l].size()));
        out.write(reinterpret_cast<const char*>(params.b[l].data()),
                  static_cast<long>(sizeof(double) * params.b[l].size()));
    }
    if (!out) throw ComputeError("write failed: " + path);
}

LoadedParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open parameter file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kParamMagic, 8) != 0)
        throw ValidationError(path + ": not a qnet parameter file");
    LoadedParams lp;
    std::uint32_t n_layers = 0;
    in.read(reinterpret_cast<char*>(&lp.config_hash), sizeof lp.config_hash);
    in.read(reinterpret_cast<char*>(&n_layers), sizeof n_layers);
    if (!in || n_layers == 0 || n_layers > 64)
        throw ValidationError(path + ": corrupt layer count");
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        std::uint32_t rows = 0, cols = 0;
        in.read(reinterpret_cast<char*>(&rows), sizeof rows);
        in.read(reinterpret_cast<char*>(&cols), sizeof cols);
        if (!in || rows == 0 || cols == 0 || rows > 100000 || cols > 100000)
            throw ValidationError(path + ": corrupt layer shape");
        Eigen::MatrixXd w(rows, cols);
        Eigen::VectorXd bv(rows);
        in.read(reinterpret_cast<char*>(w.data()),
                static_cast<long>(sizeof(double) * w.size()));
        in.read(reinterpret_cast<char*>(bv.data()),
                static_cast<long>(sizeof(double) * bv.size()));
        if (!in) throw ValidationError(path + ": truncated parameter file");
        lp.params.W.push_back(std::move(w));
        lp.params.b.push_back(std::move(bv));
    }
    return lp;
}

void export_params_json(const QParams& params, const std::string& path) {
    nlohmann::json j;
    j["n_layers"] = params.n_layers();
    for (std::size_t l = 0; l < params.W.size(); ++l) {
        nlohmann::json layer;
        layer["rows"] = params.W[l].rows();
        layer["cols"] = params.W[l].cols();
        std::vector<double> w(params.W[l].data(),
                              params.W[l].data() + params.W[l].size());
        std::vector<double> bv(params.b[l].data(),
                               params.b[l].data() + params.b[l].size());
        layer["W"] = w;
        layer["b"] = bv;
        j["layers"].push_back(layer);
    }
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace bcgen
