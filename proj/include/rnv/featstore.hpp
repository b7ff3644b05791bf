#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnv/matrix.hpp"

namespace rnv {

namespace fs = std::filesystem;

struct FrameFlags {
    bool is_silence = false;
    bool is_voiced = false;

    // RNVF flag byte: bit 0 silence, bit 1 voiced.
    std::uint8_t to_byte() const noexcept {
        return static_cast<std::uint8_t>((is_silence ? 1U : 0U) | (is_voiced ? 2U : 0U));
    }
    static FrameFlags from_byte(std::uint8_t b) noexcept { return {(b & 1U) != 0, (b & 2U) != 0}; }

    friend bool operator==(const FrameFlags&, const FrameFlags&) = default;
};

// Time-major feature frames from an encoder, with an optional per-frame
// silence/voicing annotation.
class FeatureSequence {
public:
    FeatureSequence() = default;
    FeatureSequence(float frame_rate, FloatMatrix frames,
                    std::optional<std::vector<FrameFlags>> flags = std::nullopt);

    // Empty sequence that still carries a dimensionality.
    static FeatureSequence empty(float frame_rate, std::size_t dim);

    float frame_rate() const noexcept { return frame_rate_; }
    std::size_t dim() const noexcept { return frames_.cols(); }
    std::size_t n_frames() const noexcept { return frames_.rows(); }
    double duration_seconds() const noexcept { return static_cast<double>(n_frames()) / frame_rate_; }

    const FloatMatrix& frames() const noexcept { return frames_; }
    std::span<const float> frame(std::size_t t) const { return frames_.row(t); }

    bool has_flags() const noexcept { return flags_.has_value(); }
    const std::optional<std::vector<FrameFlags>>& flags() const noexcept { return flags_; }

    // Throws std::invalid_argument describing the first violated invariant.
    void validate() const;

    // Bit-exact comparison, including frame_rate.
    friend bool operator==(const FeatureSequence& a, const FeatureSequence& b);

private:
    float frame_rate_ = 50.0F;
    FloatMatrix frames_;
    std::optional<std::vector<FrameFlags>> flags_;
};

class RnvfError : public std::runtime_error {
public:
    enum class Kind { BadMagic, UnsupportedVersion, Truncated, InvalidHeader, Io };

    RnvfError(Kind kind, std::uint64_t offset, const std::string& what);

    Kind kind() const noexcept { return kind_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::uint64_t offset_;
};

inline constexpr std::uint32_t kRnvfVersion = 1;
inline constexpr std::size_t kRnvfHeaderBytes = 21;

std::vector<std::uint8_t> encode_rnvf(const FeatureSequence& seq);
FeatureSequence decode_rnvf(std::span<const std::uint8_t> bytes);

// Writes via a temporary file in the destination directory, then renames.
void write_rnvf(const FeatureSequence& seq, const fs::path& destination);
FeatureSequence read_rnvf(const fs::path& source);

enum class Severity { Control, Mild, Moderate, ModSevere, Severe, Unknown };

std::string to_string(Severity s);
// Case-insensitive; anything outside the closed set becomes Unknown with a warning.
Severity parse_severity(std::string_view text);

struct UtteranceRecord {
    std::string id;
    std::string speaker;
    Severity severity = Severity::Unknown;
    fs::path feature_path;
    std::optional<fs::path> audio_path;
    std::optional<std::string> transcript;
};

class ManifestError : public std::runtime_error {
public:
    ManifestError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// One JSON object per line. Relative paths resolve against `base_dir`.
std::vector<UtteranceRecord> parse_manifest(std::string_view text, const fs::path& base_dir = {});
// Relative paths resolve against the manifest's own directory.
std::vector<UtteranceRecord> read_manifest(const fs::path& source);

// Shared by every writer that must not leave partial files behind.
void write_file_atomic(const fs::path& destination, std::span<const std::uint8_t> bytes);
void write_text_atomic(const fs::path& destination, std::string_view text);
std::vector<std::uint8_t> read_file_bytes(const fs::path& source);

}  // namespace rnv
