#pragma once

#include <filesystem>
#include <vector>

#include "rnv/featstore.hpp"

namespace rnv {

struct Waveform {
    int sample_rate = 16000;
    std::vector<float> samples;
};

// RIFF/WAVE, PCM 16-bit mono only. Samples are scaled by 1/32768.
Waveform read_wav(const std::filesystem::path& source);
Waveform decode_wav(std::span<const std::uint8_t> bytes);
// PCM16 mono; samples are clipped to [-1, 32767/32768].
void write_wav(const Waveform& w, const std::filesystem::path& destination);

struct FlaggerConfig {
    double silence_db_below_reference = 40.0;
    double reference_percentile = 0.95;
    double min_pitch_hz = 60.0;
    double max_pitch_hz = 400.0;
    double voicing_threshold = 0.5;
};

// Energy VAD plus autocorrelation voicing, one decision per hop. Frame t uses a
// rectangular window of two hops centred on the middle of hop t; samples outside
// the waveform count as zeros. Returns ceil(n_samples / hop) entries.
std::vector<FrameFlags> compute_frame_flags(const Waveform& w, double frame_rate, const FlaggerConfig& config = {});

// Normalized autocorrelation peak over the configured pitch lag range; exposed
// so callers can inspect the voicing statistic behind a decision.
double voicing_strength(std::span<const float> window, int sample_rate, const FlaggerConfig& config = {});

}  // namespace rnv
