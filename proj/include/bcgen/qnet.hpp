#ifndef BCGEN_QNET_HPP
#define BCGEN_QNET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace bcgen {

/// Default Q-network topology: 209-100-25-2.
std::vector<int> default_qnet_dims(int input_dim = 209);

/// Weights and biases of the ReLU MLP. layer k maps dims[k] -> dims[k+1];
/// hidden layers are ReLU, the output layer is linear and emits
/// (Q(s,0), Q(s,1)).
struct QParams {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;

    int input_dim() const { return static_cast<int>(W.front().cols()); }
    int output_dim() const { return static_cast<int>(W.back().rows()); }
    std::size_t n_layers() const { return W.size(); }
    std::size_t n_parameters() const;

    bool same_shape(const QParams& o) const;
};

/// He-uniform initialization, zero biases, deterministic in the seed.
QParams init_qnet(std::uint64_t seed, const std::vector<int>& dims);

/// Gradients (or Adam moments) shaped like QParams.
struct GradientBundle {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;

    static GradientBundle zeros_like(const QParams& p);
};

/// Q-values for a batch of states (one column per state). Output is
/// output_dim x batch.
Eigen::MatrixXd forward(const QParams& params, const Eigen::MatrixXd& states);

/// Q-values for a single state.
Eigen::VectorXd forward_one(const QParams& params,
                            const Eigen::VectorXd& state);

/// Elementwise smooth-L1 (Huber, delta = 1): 0.5 x^2 for |x| < 1,
/// |x| - 0.5 otherwise; mean over the batch.
double smooth_l1(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

/// Gradients of the mean smooth-L1 loss between Q(s, a) and the TD
/// target, for a minibatch. Gradient flows only through the chosen
/// action's Q-value. Returns the loss as well.
struct BackwardResult {
    GradientBundle grads;
    double loss;
};
BackwardResult backward(const QParams& params, const Eigen::MatrixXd& states,
                        const std::vector<std::uint8_t>& actions,
                        const Eigen::VectorXd& targets);

/// Adam optimizer state: first/second moment accumulators plus step count.
struct AdamState {
    GradientBundle m;
    GradientBundle v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(const QParams& p);
};

/// One bias-corrected Adam update, in place. Step counter is incremented
/// before bias correction.
void adam_step(QParams& params, AdamState& adam, const GradientBundle& grads,
               double lr);

/// Versioned binary parameter file; float64 payload, bitwise round-trip.
void save_params(const QParams& params, const std::string& path,
                 std::uint64_t config_hash = 0);
struct LoadedParams {
    QParams params;
    std::uint64_t config_hash;
};
LoadedParams load_params(const std::string& path);

/// Human-readable JSON export for inspection.
void export_params_json(const QParams& params, const std::string& path);

}  // namespace bcgen

#endif
