#ifndef BCGEN_AUDIO_HPP
#define BCGEN_AUDIO_HPP

#include <string>
#include <vector>

namespace bcgen {

constexpr int kCanonicalSampleRate = 16000;

/// Mono audio, samples in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = kCanonicalSampleRate;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

/// Reads a 16-bit PCM little-endian mono WAV file. Anything else
/// (stereo, other encodings, other sample rates) is rejected.
AudioClip read_wav(const std::string& path);

/// Writes a clip as 16-bit PCM mono WAV. Samples are clamped to [-1, 1].
void write_wav(const std::string& path, const AudioClip& clip);

/// Pure sine test tone, peak amplitude 0.5. freq must lie in (0, Nyquist).
AudioClip synth_tone(double freq_hz, double duration_s,
                     int sample_rate = kCanonicalSampleRate);

}  // namespace bcgen

#endif
