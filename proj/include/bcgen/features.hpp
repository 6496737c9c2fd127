#ifndef BCGEN_FEATURES_HPP
#define BCGEN_FEATURES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bcgen/dsp.hpp"

namespace bcgen {

constexpr int kSummaryWindow = 40;   // 1 s at 40 Hz
constexpr int kNumFunctionals = 11;
constexpr int kStateDim = BaseFeatureFrame::kDim * kNumFunctionals;  // 209
constexpr double kFrameRateHz = 40.0;

/// One MDP state: 209 summary statistics of the trailing second.
struct StateVector {
    Eigen::VectorXd values;  // length kStateDim
    double timestamp = 0.0;
};

/// Linear-interpolation quantile of a sorted vector, q in [0, 1].
double quantile_sorted(const Eigen::VectorXd& sorted, double q);

/// The 11 summary functionals of one value series, in the fixed order:
/// mean, std, skewness, kurtosis, range, min, max, Q1, Q3, median, IQR.
/// Moments use population normalization; skewness/kurtosis are 0 when
/// std is 0; kurtosis is raw, not excess.
Eigen::Matrix<double, kNumFunctionals, 1> summarize_series(
    const Eigen::VectorXd& values);

/// Summarizes exactly kSummaryWindow consecutive frames into a state
/// vector, base-dimension-major layout. Throws ValidationError on an
/// underfull window. The state timestamp is the last frame's timestamp.
StateVector summarize(const std::vector<BaseFeatureFrame>& window);

/// Base frames -> state stream. The state at tick k summarizes the
/// trailing second, base frames [k-40, k), and carries timestamp
/// k * 25 ms. The first second yields no state, so n base frames
/// produce n - 40 states (ticks 40 .. n-1).
std::vector<StateVector> state_stream(const std::vector<BaseFeatureFrame>& frames);

/// Feature file I/O. CSV, one row per tick: timestamp then kStateDim
/// values; the header comment records a config hash.
void write_feature_csv(const std::string& path,
                       const std::vector<StateVector>& states,
                       std::uint64_t config_hash);
std::vector<StateVector> read_feature_csv(const std::string& path);

}  // namespace bcgen

#endif
