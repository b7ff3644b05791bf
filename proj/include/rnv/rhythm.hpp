#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnv/featstore.hpp"
#include "rnv/segmenter.hpp"

namespace rnv {

// Two-parameter gamma (location fixed at zero) over durations in seconds.
struct GammaParams {
    double shape = 1.0;
    double scale = 1.0;
    std::size_t n_samples = 0;

    double mean() const noexcept { return shape * scale; }
    friend bool operator==(const GammaParams&, const GammaParams&) = default;
};

// Maximum-likelihood fit. Throws std::invalid_argument for fewer than two
// samples, a non-positive duration, or zero variance.
GammaParams fit_gamma(std::span<const double> durations);

double gamma_pdf(const GammaParams& p, double x);
double gamma_cdf(const GammaParams& p, double x);
// Inverse CDF on (0, 1), accurate to |cdf(x) - u| <= 1e-8.
double gamma_ppf(const GammaParams& p, double u);

// Linear-interpolation resampling of frames to `frames_out` rows.
FloatMatrix time_stretch(const FloatMatrix& frames, std::size_t frames_out);

struct RhythmModel {
    std::string speaker;
    float frame_rate = 50.0F;
    double rate_sps = 0.0;  // sonorant segments per second
    // Indexed by SpeechType. Absent entries block fine-grained conversion.
    std::array<std::optional<GammaParams>, kNumSpeechTypes> fine;

    bool has_fine() const noexcept {
        return fine[0].has_value() && fine[1].has_value() && fine[2].has_value();
    }
    const std::optional<GammaParams>& fine_for(SpeechType t) const { return fine[index_of(t)]; }
};

// Sonorant segment count divided by total duration (silences included).
// A corpus without sonorants yields 0 and a warning.
double estimate_speaking_rate(std::span<const Segmentation> segmentations, double frame_rate);

struct RhythmStats {
    double rate_sps = 0.0;
    std::array<std::vector<double>, kNumSpeechTypes> durations;  // seconds

    std::size_t segment_count(SpeechType t) const { return durations[index_of(t)].size(); }
};

RhythmStats collect_rhythm_stats(std::span<const Segmentation> segmentations, double frame_rate);

// Fits every type with enough data. Types that cannot be fitted stay empty
// and are reported through warn().
RhythmModel build_rhythm_model(const std::string& speaker, std::span<const Segmentation> segmentations,
                               float frame_rate);

std::string rhythm_model_to_json(const RhythmModel& model);
RhythmModel rhythm_model_from_json(std::string_view text);
void save_rhythm_model(const RhythmModel& model, const std::filesystem::path& destination);
RhythmModel load_rhythm_model(const std::filesystem::path& source);

// Whole-utterance stretch to max(1, round(T * src.rate_sps / tgt.rate_sps)) frames.
std::size_t global_output_length(std::size_t frames_in, double src_rate, double tgt_rate);
FeatureSequence convert_global(const FeatureSequence& seq, const RhythmModel& src, const RhythmModel& tgt);

struct StretchStep {
    Segment source;
    std::size_t target_frames = 1;
};
using StretchPlan = std::vector<StretchStep>;

inline constexpr double kRankClampLow = 0.001;
inline constexpr double kRankClampHigh = 0.999;

// Maps each segment duration through the source CDF and target PPF.
StretchPlan plan_fine(const Segmentation& segmentation, float frame_rate, const RhythmModel& src, const RhythmModel& tgt);
FeatureSequence apply_stretch_plan(const FeatureSequence& seq, const StretchPlan& plan);
FeatureSequence convert_fine(const FeatureSequence& seq, const Segmentation& segmentation, const RhythmModel& src,
                             const RhythmModel& tgt);

}  // namespace rnv
