#include "bcgen/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bcgen/common.hpp"

namespace bcgen {

double quantile_sorted(const Eigen::VectorXd& sorted, double q) {
    const long n = sorted.size();
    if (n == 1) return sorted[0];
    const double pos = q * static_cast<double>(n - 1);
    const long lo = static_cast<long>(std::floor(pos));
    const long hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Eigen::Matrix<double, kNumFunctionals, 1> summarize_series(
    const Eigen::VectorXd& values) {
    const long n = values.size();
    if (n == 0) throw ValidationError("summarize_series: empty series");

    const double mean = values.mean();
    const Eigen::ArrayXd centered = values.array() - mean;
    const double var = centered.square().mean();
    const double sd = std::sqrt(var);
    double skew = 0.0, kurt = 0.0;
    if (sd > 0.0) {
        skew = centered.cube().mean() / (var * sd);
        kurt = centered.square().square().mean() / (var * var);
    }

    Eigen::VectorXd sorted = values;
    std::sort(sorted.data(), sorted.data() + n);
    const double mn = sorted[0];
    const double mx = sorted[n - 1];
    const double q1 = quantile_sorted(sorted, 0.25);
    const double q3 = quantile_sorted(sorted, 0.75);
    const double med = quantile_sorted(sorted, 0.5);

    Eigen::Matrix<double, kNumFunctionals, 1> out;
    out << mean, sd, skew, kurt, mx - mn, mn, mx, q1, q3, med, q3 - q1;
    return out;
}

StateVector summarize(const std::vector<BaseFeatureFrame>& window) {
    if (window.size() != kSummaryWindow)
        throw ValidationError("window underfull: need " +
                              std::to_string(kSummaryWindow) + " frames, got " +
                              std::to_string(window.size()));

    Eigen::MatrixXd raw(BaseFeatureFrame::kDim, kSummaryWindow);
    for (int k = 0; k < kSummaryWindow; ++k) raw.col(k) = window[k].flatten();

    StateVector s;
    s.values.resize(kStateDim);
    for (int d = 0; d < BaseFeatureFrame::kDim; ++d)
        s.values.segment<kNumFunctionals>(d * kNumFunctionals) =
            summarize_series(raw.row(d).transpose());
    s.timestamp = window.back().timestamp + kHopMs / 1000.0;
    return s;
}

std::vector<StateVector> state_stream(
    const std::vector<BaseFeatureFrame>& frames) {
    std::vector<StateVector> states;
    if (frames.size() < kSummaryWindow + 1) return states;
    states.reserve(frames.size() - kSummaryWindow);
    std::vector<BaseFeatureFrame> window(kSummaryWindow);
    for (std::size_t k = kSummaryWindow; k < frames.size(); ++k) {
        std::copy(frames.begin() + (k - kSummaryWindow), frames.begin() + k,
                  window.begin());
        states.push_back(summarize(window));
    }
    return states;
}

void write_feature_csv(const std::string& path,
                       const std::vector<StateVector>& states,
                       std::uint64_t config_hash) {
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot open for writing: " + path);
    out << "# bcgen-features v1 config_hash=" << hex64(config_hash) << "\n";
    out << "timestamp";
    for (int i = 0; i < kStateDim; ++i) out << ",f" << i;
    out << "\n";
    // Values are written at float32 precision: 9 significant digits
    // round-trip a float exactly, so the on-disk text and the in-memory
    // float pool agree bit for bit downstream.
    for (const auto& s : states) {
        // full precision for the timestamp: downstream reward windows are
        // half-open and must see the exact tick instant
        out.precision(17);
        out << s.timestamp;
        out.precision(9);
        for (long i = 0; i < s.values.size(); ++i)
            out << ',' << static_cast<float>(s.values[i]);
        out << "\n";
    }
    if (!out) throw ComputeError("write failed: " + path);
}

std::vector<StateVector> read_feature_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open feature file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# bcgen-features v1", 0) != 0)
        throw ValidationError(path + ": missing feature file header");
    std::getline(in, line);  // column names

    std::vector<StateVector> states;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        StateVector s;
        s.values.resize(kStateDim);
        std::istringstream ss(line);
        std::string tok;
        if (!std::getline(ss, tok, ',')) continue;
        s.timestamp = std::stod(tok);
        for (int i = 0; i < kStateDim; ++i) {
            if (!std::getline(ss, tok, ','))
                throw ValidationError(path + ": short feature row");
            s.values[i] = std::stod(tok);
        }
        states.push_back(std::move(s));
    }
    return states;
}

}  // namespace bcgen
