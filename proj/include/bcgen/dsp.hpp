#ifndef BCGEN_DSP_HPP
#define BCGEN_DSP_HPP

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "bcgen/audio.hpp"

namespace bcgen {

constexpr int kWindowMs = 40;
constexpr int kHopMs = 25;
constexpr int kNumMfcc = 13;
constexpr int kNumMelFilters = 26;
constexpr double kLogEnergyFloor = 1e-10;
constexpr double kIntensityFloorDb = -100.0;
constexpr double kPitchMinHz = 50.0;
constexpr double kPitchMaxHz = 500.0;

/// One 40 Hz analysis frame: 13 MFCC + 6 prosody scalars.
struct BaseFeatureFrame {
    Eigen::Matrix<double, kNumMfcc, 1> mfcc;
    double intensity_db = 0.0;
    double pitch_hz = 0.0;
    double pitch_confidence = 0.0;
    double d_intensity = 0.0;
    double d_pitch = 0.0;
    double d_confidence = 0.0;
    double timestamp = 0.0;

    static constexpr int kDim = 19;

    /// Flattens to the fixed 19-scalar layout: mfcc[0..12], intensity,
    /// pitch, confidence, d_intensity, d_pitch, d_confidence.
    Eigen::Matrix<double, kDim, 1> flatten() const;
};

/// Hamming-tapered sliding windows. Frame k covers samples
/// [k*hop, k*hop + win); count = floor((N - win)/hop) + 1.
/// Throws ValidationError if the clip is shorter than one window.
std::vector<Eigen::VectorXd> frame_signal(const AudioClip& clip,
                                          int win_ms = kWindowMs,
                                          int hop_ms = kHopMs);

/// In-place radix-2 FFT, n must be a power of two.
void fft(std::vector<std::complex<double>>& a);

/// Triangular mel filterbank on the HTK mel scale, spanning 0 Hz to
/// Nyquist, evaluated on an FFT of n_fft points. Rows are filters,
/// columns are the n_fft/2 + 1 non-negative frequency bins.
Eigen::MatrixXd mel_filterbank(int n_filters, int n_fft, int sample_rate);

/// 13 MFCCs of one tapered frame: zero-padded power spectrum, mel
/// filterbank, log with floor, orthonormal DCT-II coefficients 0..12.
Eigen::Matrix<double, kNumMfcc, 1> mfcc(const Eigen::VectorXd& frame,
                                        int sample_rate);

struct ProsodyFrame {
    double intensity_db;
    double pitch_hz;
    double pitch_confidence;
};

/// Intensity (dB RMS, floored), pitch and pitch confidence from the
/// normalized autocorrelation peak in the 50-500 Hz lag band.
ProsodyFrame prosody_frame(const Eigen::VectorXd& frame, int sample_rate);

/// Full 40 Hz base feature stream for a clip: MFCC + prosody with first
/// differences across consecutive frames (first frame's differences are 0).
std::vector<BaseFeatureFrame> base_features(const AudioClip& clip);

}  // namespace bcgen

#endif
