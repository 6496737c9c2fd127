#include "bcgen/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bcgen/common.hpp"

namespace bcgen {

namespace {

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open WAV file: " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw ValidationError(path + ": not a RIFF file");
    read_u32(in);  // chunk size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw ValidationError(path + ": not a WAVE file");

    int sample_rate = 0;
    int channels = 0;
    int bits = 0;
    int format = 0;
    bool have_fmt = false;
    std::vector<double> samples;

    while (in.read(tag, 4)) {
        std::uint32_t size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            sample_rate = static_cast<int>(read_u32(in));
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw ValidationError(path + ": data before fmt chunk");
            if (format != 1 || bits != 16)
                throw ValidationError(path + ": only 16-bit PCM supported");
            if (channels != 1)
                throw ValidationError(path + ": only mono supported");
            if (sample_rate != kCanonicalSampleRate)
                throw ValidationError(path + ": sample rate must be 16000 Hz, got " +
                                      std::to_string(sample_rate));
            std::size_t n = size / 2;
            samples.resize(n);
            std::vector<char> raw(size);
            in.read(raw.data(), size);
            if (!in) throw ValidationError(path + ": truncated data chunk");
            for (std::size_t i = 0; i < n; ++i) {
                std::int16_t s = static_cast<std::int16_t>(
                    static_cast<unsigned char>(raw[2 * i]) |
                    (static_cast<unsigned char>(raw[2 * i + 1]) << 8));
                samples[i] = s / 32768.0;
            }
            break;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (samples.empty()) throw ValidationError(path + ": no data chunk found");

    AudioClip clip;
    clip.samples = std::move(samples);
    clip.sample_rate = sample_rate;
    return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ComputeError("cannot open for writing: " + path);

    const std::uint32_t data_size =
        static_cast<std::uint32_t>(clip.samples.size() * 2);
    out.write("RIFF", 4);
    write_u32(out, 36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
    write_u32(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_size);
    for (double s : clip.samples) {
        double c = std::clamp(s, -1.0, 1.0);
        auto q = static_cast<std::int16_t>(std::lrint(c * 32767.0));
        write_u16(out, static_cast<std::uint16_t>(q));
    }
    if (!out) throw ComputeError("write failed: " + path);
}

AudioClip synth_tone(double freq_hz, double duration_s, int sample_rate) {
    if (freq_hz <= 0.0 || freq_hz >= sample_rate / 2.0)
        throw ValidationError("tone frequency must lie in (0, Nyquist)");
    AudioClip clip;
    clip.sample_rate = sample_rate;
    auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    clip.samples.resize(n);
    const double w = 2.0 * M_PI * freq_hz / sample_rate;
    for (std::size_t i = 0; i < n; ++i)
        clip.samples[i] = 0.5 * std::sin(w * static_cast<double>(i));
    return clip;
}

}  // namespace bcgen
