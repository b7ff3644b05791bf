#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnv/featstore.hpp"
#include "rnv/knnvc.hpp"
#include "rnv/rhythm.hpp"
#include "rnv/segmenter.hpp"

namespace rnv {

// Raised for anything that makes a whole run impossible (exit status 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ConversionSetup { Original, Vocoded, RhythmGlobal, RhythmFine, VC, RhythmGlobalVC, RhythmFineVC };

std::string to_string(ConversionSetup setup);
// Accepts the CLI spellings: original, vocoded, rhythm-global, rhythm-fine, vc,
// rhythm-global-vc, rhythm-fine-vc.
ConversionSetup parse_setup(std::string_view name);
std::vector<std::string> setup_names();

bool uses_global_rhythm(ConversionSetup s);
bool uses_fine_rhythm(ConversionSetup s);
bool uses_voice_conversion(ConversionSetup s);

// Source rhythm models: one shared model, or one per speaker.
class SourceRhythms {
public:
    SourceRhythms() = default;
    explicit SourceRhythms(RhythmModel shared);
    explicit SourceRhythms(std::vector<RhythmModel> per_speaker);

    // A file holds one shared model; a directory holds one *.json per speaker.
    static SourceRhythms load(const std::filesystem::path& path);

    bool empty() const noexcept { return !shared_ && per_speaker_.empty(); }
    const RhythmModel* find(const std::string& speaker) const;
    std::vector<const RhythmModel*> all() const;

private:
    std::optional<RhythmModel> shared_;
    std::map<std::string, RhythmModel> per_speaker_;
};

struct ConversionModels {
    std::optional<SegmenterModel> segmenter;
    SourceRhythms source_rhythm;
    std::optional<RhythmModel> target_rhythm;
    std::optional<MatchingPool> pool;
};

struct ConversionConfig {
    ConversionSetup setup = ConversionSetup::Original;
    std::size_t k = kDefaultNeighbours;
    double penalty = kDefaultSegmentPenalty;
};

// Throws ConfigError when a model the setup depends on is missing or unusable.
void check_setup(const ConversionConfig& config, const ConversionModels& models);

// Applies the setup to one utterance: rhythm first, then voice conversion.
FeatureSequence convert_utterance(const FeatureSequence& seq, const std::string& speaker,
                                  const ConversionConfig& config, const ConversionModels& models);

struct UtteranceOutcome {
    std::string id;
    std::filesystem::path input;
    std::filesystem::path output;
    std::size_t frames_in = 0;
    std::size_t frames_out = 0;
    std::optional<std::string> error;
};

struct RunResult {
    std::vector<UtteranceOutcome> utterances;
    std::map<std::string, std::string> model_hashes;

    std::size_t n_failed() const;
    std::vector<std::filesystem::path> outputs() const;
};

inline constexpr const char* kRunManifestName = "run_manifest.json";

// Writes <out_dir>/<id>.rnvf per utterance plus a run manifest. Per-utterance
// failures are recorded and skipped; configuration problems throw before any
// utterance is touched.
RunResult run_conversion(std::span<const UtteranceRecord> manifest, const ConversionModels& models,
                         const ConversionConfig& config, const std::filesystem::path& out_dir);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Flags for segmenter training: the RNVF flags when present, otherwise
// computed from audio_path and aligned to the frame count (at most 2 frames
// of slack). Empty when neither source is usable.
std::optional<std::vector<FrameFlags>> training_flags(const UtteranceRecord& record, const FeatureSequence& seq);

struct SpeakerRhythm {
    std::string speaker;
    Severity severity = Severity::Unknown;
    std::size_t n_utterances = 0;
    double total_seconds = 0.0;
    double rate_sps = 0.0;
    std::array<std::size_t, kNumSpeechTypes> segment_counts{};
    std::array<std::optional<GammaParams>, kNumSpeechTypes> fine;
};

// Per-speaker speaking rate, segment counts and duration fits. Speakers are
// ordered by first appearance in the manifest.
std::vector<SpeakerRhythm> analyze_rhythm(std::span<const UtteranceRecord> manifest, const SegmenterModel& model,
                                          double penalty = kDefaultSegmentPenalty);

std::string analysis_to_json(std::span<const SpeakerRhythm> rows);
std::string analysis_to_csv(std::span<const SpeakerRhythm> rows);

}  // namespace rnv
