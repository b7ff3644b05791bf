#include "rnv/signals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bytes.hpp"

namespace rnv {

namespace {

[[noreturn]] void unsupported(const std::string& field, long value) {
    throw std::runtime_error("WAV: " + field + "=" + std::to_string(value) + " unsupported");
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    if (!r.has(12)) throw std::runtime_error("WAV: file too short for RIFF header");
    if (r.str(4) != "RIFF") throw std::runtime_error("WAV: missing RIFF tag");
    r.u32();
    if (r.str(4) != "WAVE") throw std::runtime_error("WAV: missing WAVE tag");

    bool have_fmt = false;
    int sample_rate = 0;
    while (r.has(8)) {
        const std::string id = r.str(4);
        const std::uint32_t size = r.u32();
        if (!r.has(size)) {
            if (id != "data") throw std::runtime_error("WAV: chunk \"" + id + "\" truncated");
        }
        if (id == "fmt ") {
            if (size < 16) throw std::runtime_error("WAV: fmt chunk too short");
            const std::size_t start = r.offset();
            const std::uint32_t fmt_word = r.u32();
            const auto audio_format = static_cast<std::uint16_t>(fmt_word & 0xFFFFU);
            const auto channels = static_cast<std::uint16_t>(fmt_word >> 16);
            sample_rate = static_cast<int>(r.u32());
            r.u32();  // byte rate
            const std::uint32_t align_bits = r.u32();
            const auto bits = static_cast<std::uint16_t>(align_bits >> 16);
            if (audio_format != 1) unsupported("audio_format", audio_format);
            if (channels != 1) unsupported("channels", channels);
            if (bits != 16) unsupported("bits_per_sample", bits);
            if (sample_rate <= 0) unsupported("sample_rate", sample_rate);
            r.str(size - (r.offset() - start));
            if (size % 2 == 1 && r.has(1)) r.u8();
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw std::runtime_error("WAV: data chunk before fmt chunk");
            // Some writers leave the data size unset when streaming; take what is there.
            const std::size_t n_bytes = std::min<std::size_t>(size, r.remaining());
            Waveform w;
            w.sample_rate = sample_rate;
            w.samples.resize(n_bytes / 2);
            for (float& s : w.samples) {
                const auto lo = r.u8();
                const auto hi = r.u8();
                const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
                s = static_cast<float>(v) / 32768.0F;
            }
            return w;
        } else {
            r.str(size);
            if (size % 2 == 1 && r.has(1)) r.u8();
        }
    }
    throw std::runtime_error(have_fmt ? "WAV: no data chunk" : "WAV: no fmt chunk");
}

Waveform read_wav(const std::filesystem::path& source) { return decode_wav(read_file_bytes(source)); }

void write_wav(const Waveform& w, const std::filesystem::path& destination) {
    if (w.sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
    const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
    detail::ByteWriter out(44 + data_bytes);
    out.bytes("RIFF", 4);
    out.u32(36 + data_bytes);
    out.bytes("WAVE", 4);
    out.bytes("fmt ", 4);
    out.u32(16);
    out.u32(1U | (1U << 16));  // PCM, mono
    out.u32(static_cast<std::uint32_t>(w.sample_rate));
    out.u32(static_cast<std::uint32_t>(w.sample_rate) * 2);
    out.u32(2U | (16U << 16));  // block align, bits
    out.bytes("data", 4);
    out.u32(data_bytes);
    for (float s : w.samples) {
        const double scaled = std::clamp(std::round(static_cast<double>(s) * 32768.0), -32768.0, 32767.0);
        const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled));
        out.u8(static_cast<std::uint8_t>(v & 0xFFU));
        out.u8(static_cast<std::uint8_t>(v >> 8));
    }
    const auto bytes = out.take();
    write_file_atomic(destination, bytes);
}

double voicing_strength(std::span<const float> window, int sample_rate, const FlaggerConfig& config) {
    const std::size_t n = window.size();
    if (n == 0) return 0.0;
    double mean = 0.0;
    for (float s : window) mean += s;
    mean /= static_cast<double>(n);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = window[i] - mean;

    const auto min_lag = static_cast<std::size_t>(std::max(1.0, std::floor(sample_rate / config.max_pitch_hz)));
    const auto max_lag = std::min(n - 1, static_cast<std::size_t>(std::ceil(sample_rate / config.min_pitch_hz)));
    double best = 0.0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
        double cross = 0.0;
        double head = 0.0;
        double tail = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) {
            cross += x[i] * x[i + lag];
            head += x[i] * x[i];
            tail += x[i + lag] * x[i + lag];
        }
        if (head <= 0.0 || tail <= 0.0) continue;
        best = std::max(best, cross / std::sqrt(head * tail));
    }
    return best;
}

std::vector<FrameFlags> compute_frame_flags(const Waveform& w, double frame_rate, const FlaggerConfig& config) {
    if (w.samples.empty()) throw std::invalid_argument("compute_frame_flags: empty waveform");
    if (!(frame_rate > 0.0)) throw std::invalid_argument("compute_frame_flags: frame_rate must be positive");
    const double hop = static_cast<double>(w.sample_rate) / frame_rate;
    if (hop < 1.0) throw std::invalid_argument("compute_frame_flags: hop below one sample");

    const auto n = static_cast<long>(w.samples.size());
    const auto n_frames = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / hop - 1e-9));
    const auto win_len = static_cast<long>(std::lround(2.0 * hop));

    std::vector<std::vector<float>> windows(n_frames);
    std::vector<double> rms(n_frames, 0.0);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const auto start = static_cast<long>(std::floor((static_cast<double>(t) - 0.5) * hop));
        auto& win = windows[t];
        win.assign(static_cast<std::size_t>(win_len), 0.0F);
        double energy = 0.0;
        for (long i = 0; i < win_len; ++i) {
            const long src = start + i;
            if (src >= 0 && src < n) {
                win[static_cast<std::size_t>(i)] = w.samples[static_cast<std::size_t>(src)];
                energy += static_cast<double>(w.samples[static_cast<std::size_t>(src)]) * w.samples[static_cast<std::size_t>(src)];
            }
        }
        rms[t] = std::sqrt(energy / static_cast<double>(win_len));
    }

    std::vector<double> sorted = rms;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil(config.reference_percentile * static_cast<double>(n_frames)));
    const double reference = sorted[std::clamp<std::size_t>(rank, 1, n_frames) - 1];
    const double gate = reference * std::pow(10.0, -config.silence_db_below_reference / 20.0);

    std::vector<FrameFlags> flags(n_frames);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const bool silent = reference <= 0.0 || rms[t] < gate;
        flags[t].is_silence = silent;
        flags[t].is_voiced = !silent && voicing_strength(windows[t], w.sample_rate, config) >= config.voicing_threshold;
    }
    return flags;
}

}  // namespace rnv
