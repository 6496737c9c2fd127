#include "bcgen/dsp.hpp"

#include <cmath>

#include "bcgen/common.hpp"

namespace bcgen {

Eigen::Matrix<double, BaseFeatureFrame::kDim, 1> BaseFeatureFrame::flatten()
    const {
    Eigen::Matrix<double, kDim, 1> v;
    v.head<kNumMfcc>() = mfcc;
    v[13] = intensity_db;
    v[14] = pitch_hz;
    v[15] = pitch_confidence;
    v[16] = d_intensity;
    v[17] = d_pitch;
    v[18] = d_confidence;
    return v;
}

std::vector<Eigen::VectorXd> frame_signal(const AudioClip& clip, int win_ms,
                                          int hop_ms) {
    const int win = clip.sample_rate * win_ms / 1000;
    const int hop = clip.sample_rate * hop_ms / 1000;
    const auto n = static_cast<long>(clip.samples.size());
    if (n < win)
        throw ValidationError("insufficient audio: need at least " +
                              std::to_string(win) + " samples, got " +
                              std::to_string(n));

    Eigen::VectorXd hamming(win);
    for (int i = 0; i < win; ++i)
        hamming[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));

    const long count = (n - win) / hop + 1;
    std::vector<Eigen::VectorXd> frames;
    frames.reserve(count);
    for (long k = 0; k < count; ++k) {
        Eigen::VectorXd f(win);
        for (int i = 0; i < win; ++i) f[i] = clip.samples[k * hop + i];
        frames.push_back(f.cwiseProduct(hamming));
    }
    return frames;
}

void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw ValidationError("fft size must be a power of two");
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

Eigen::MatrixXd mel_filterbank(int n_filters, int n_fft, int sample_rate) {
    const int n_bins = n_fft / 2 + 1;
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    Eigen::VectorXd edges(n_filters + 2);
    for (int i = 0; i < n_filters + 2; ++i)
        edges[i] = mel_to_hz(mel_max * i / (n_filters + 1));

    Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(n_filters, n_bins);
    const double bin_hz = static_cast<double>(sample_rate) / n_fft;
    for (int m = 0; m < n_filters; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (int b = 0; b < n_bins; ++b) {
            const double f = b * bin_hz;
            if (f > lo && f < mid)
                bank(m, b) = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi)
                bank(m, b) = (hi - f) / (hi - mid);
        }
    }
    return bank;
}

Eigen::Matrix<double, kNumMfcc, 1> mfcc(const Eigen::VectorXd& frame,
                                        int sample_rate) {
    if (frame.size() == 0) throw ValidationError("empty frame");
    const std::size_t n_fft = next_pow2(static_cast<std::size_t>(frame.size()));

    std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
    for (long i = 0; i < frame.size(); ++i) buf[i] = {frame[i], 0.0};
    fft(buf);

    const int n_bins = static_cast<int>(n_fft) / 2 + 1;
    Eigen::VectorXd power(n_bins);
    for (int b = 0; b < n_bins; ++b) power[b] = std::norm(buf[b]);

    // Filterbank geometry is fixed per (n_fft, rate); cache the common case.
    static thread_local Eigen::MatrixXd cached_bank;
    static thread_local int cached_fft = 0, cached_rate = 0;
    if (cached_fft != static_cast<int>(n_fft) || cached_rate != sample_rate) {
        cached_bank = mel_filterbank(kNumMelFilters, static_cast<int>(n_fft),
                                     sample_rate);
        cached_fft = static_cast<int>(n_fft);
        cached_rate = sample_rate;
    }

    Eigen::VectorXd energies = cached_bank * power;
    Eigen::VectorXd log_e =
        energies.cwiseMax(kLogEnergyFloor).array().log().matrix();

    // Orthonormal DCT-II, coefficients 0..12.
    const int m = kNumMelFilters;
    Eigen::Matrix<double, kNumMfcc, 1> out;
    for (int c = 0; c < kNumMfcc; ++c) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j)
            acc += log_e[j] * std::cos(M_PI * c * (j + 0.5) / m);
        const double scale =
            (c == 0) ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
        out[c] = scale * acc;
    }
    return out;
}

ProsodyFrame prosody_frame(const Eigen::VectorXd& frame, int sample_rate) {
    ProsodyFrame p{kIntensityFloorDb, 0.0, 0.0};
    const long n = frame.size();
    if (n == 0) return p;

    const double energy = frame.squaredNorm();
    const double rms = std::sqrt(energy / static_cast<double>(n));
    if (rms > 0.0)
        p.intensity_db = std::max(kIntensityFloorDb, 20.0 * std::log10(rms));

    if (energy <= 0.0) return p;

    // Normalized autocorrelation peak search over the pitch lag band.
    const long lag_min = static_cast<long>(sample_rate / kPitchMaxHz);
    const long lag_max =
        std::min(n - 1, static_cast<long>(sample_rate / kPitchMinHz));
    double best_val = 0.0;
    long best_lag = 0;
    for (long lag = lag_min; lag <= lag_max; ++lag) {
        const long m = n - lag;
        const double num = frame.head(m).dot(frame.tail(m));
        const double den = std::sqrt(frame.head(m).squaredNorm() *
                                     frame.tail(m).squaredNorm());
        if (den <= 0.0) continue;
        const double r = num / den;
        if (r > best_val) {
            best_val = r;
            best_lag = lag;
        }
    }
    if (best_lag > 0) {
        p.pitch_hz = static_cast<double>(sample_rate) / best_lag;
        p.pitch_confidence = std::clamp(best_val, 0.0, 1.0);
    }
    return p;
}

std::vector<BaseFeatureFrame> base_features(const AudioClip& clip) {
    auto frames = frame_signal(clip);
    std::vector<BaseFeatureFrame> out(frames.size());
    const double hop_s = kHopMs / 1000.0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        auto& f = out[k];
        f.mfcc = mfcc(frames[k], clip.sample_rate);
        const auto pr = prosody_frame(frames[k], clip.sample_rate);
        f.intensity_db = pr.intensity_db;
        f.pitch_hz = pr.pitch_hz;
        f.pitch_confidence = pr.pitch_confidence;
        f.timestamp = static_cast<double>(k) * hop_s;
        if (k > 0) {
            f.d_intensity = f.intensity_db - out[k - 1].intensity_db;
            f.d_pitch = f.pitch_hz - out[k - 1].pitch_hz;
            f.d_confidence = f.pitch_confidence - out[k - 1].pitch_confidence;
        }
    }
    return out;
}

}  // namespace bcgen
