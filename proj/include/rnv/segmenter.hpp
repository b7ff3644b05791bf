#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnv/featstore.hpp"
#include "rnv/matrix.hpp"

namespace rnv {

enum class SpeechType : std::uint8_t { Silence = 0, Sonorant = 1, Obstruent = 2 };

inline constexpr std::size_t kNumSpeechTypes = 3;
inline constexpr std::array<SpeechType, kNumSpeechTypes> kAllSpeechTypes = {
    SpeechType::Silence, SpeechType::Sonorant, SpeechType::Obstruent};

std::string to_string(SpeechType t);
SpeechType parse_speech_type(std::string_view name);
inline std::size_t index_of(SpeechType t) { return static_cast<std::size_t>(t); }

// ---------------------------------------------------------------- k-means

struct KMeansOptions {
    std::size_t max_iterations = 300;
    double relative_tolerance = 1e-6;
};

struct KMeansResult {
    FloatMatrix centroids;
    std::vector<std::uint32_t> assignment;
    double inertia = 0.0;
    // Inertia after initialization, then after each Lloyd iteration.
    std::vector<double> inertia_history;
    std::size_t iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations on squared Euclidean distance.
// Empty clusters are re-seeded to the point farthest from its centroid.
KMeansResult kmeans_fit(const FloatMatrix& frames, std::size_t k, std::uint64_t seed,
                        const KMeansOptions& options = {});

// ---------------------------------------------------------------- grouping

// Agglomerative clustering under Ward's minimum-variance criterion, cut at
// n_groups. Labels are numbered by first appearance; ties merge the pair with
// the lowest (i, j) index.
std::vector<std::uint32_t> ward_cluster_centroids(const FloatMatrix& centroids, std::size_t n_groups = 3);

// Maps each of three groups to a speech type from the flag overlap of its
// frames: most-silent group -> Silence, most-voiced of the rest -> Sonorant,
// remaining -> Obstruent. An exact tie on a deciding fraction throws.
std::array<SpeechType, kNumSpeechTypes> assign_speech_types(std::span<const std::uint32_t> frame_groups,
                                                            std::span<const FrameFlags> frame_flags);

// ---------------------------------------------------------------- model

struct SegmenterModel {
    FloatMatrix centroids;
    std::vector<SpeechType> type_of_centroid;
    float sigma2 = 1.0F;
    float frame_rate = 50.0F;

    std::size_t dim() const noexcept { return centroids.cols(); }
    std::size_t k() const noexcept { return centroids.rows(); }
    void validate() const;

    friend bool operator==(const SegmenterModel&, const SegmenterModel&) = default;
};

struct SegmenterTrainingOptions {
    std::size_t k = 100;
    std::uint64_t seed = 0;
    KMeansOptions kmeans;
};

// Trains on frames from the target speaker; every sequence must carry flags.
SegmenterModel train_segmenter(std::span<const FeatureSequence> sequences, const SegmenterTrainingOptions& options);

std::vector<std::uint8_t> encode_segmenter(const SegmenterModel& model);
SegmenterModel decode_segmenter(std::span<const std::uint8_t> bytes);
void save_segmenter(const SegmenterModel& model, const std::filesystem::path& destination);
SegmenterModel load_segmenter(const std::filesystem::path& source);

// ---------------------------------------------------------------- segmentation

inline constexpr double kProbabilityFloor = 1e-10;
inline constexpr double kDefaultSegmentPenalty = 3.0;

// n_frames x 3 log-probabilities, columns ordered Silence, Sonorant, Obstruent.
Matrix<double> class_log_probs(const SegmenterModel& model, const FeatureSequence& seq);

struct Segment {
    SpeechType type;
    std::size_t start;  // inclusive
    std::size_t end;    // exclusive

    std::size_t length() const noexcept { return end - start; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

using Segmentation = std::vector<Segment>;

// Exact maximizer of sum of per-frame log-probabilities minus `penalty` per
// segment. Adjacent runs of the same type are merged in the result.
Segmentation segment_dp(const Matrix<double>& log_probs, double penalty);

// The quantity segment_dp maximizes, evaluated for a given segmentation.
double segmentation_objective(const Matrix<double>& log_probs, const Segmentation& segmentation, double penalty);

// Throws std::invalid_argument unless the segments tile [0, n_frames) with
// non-empty, type-alternating runs.
void validate_segmentation(const Segmentation& segmentation, std::size_t n_frames);

Segmentation segment_sequence(const SegmenterModel& model, const FeatureSequence& seq,
                              double penalty = kDefaultSegmentPenalty);

}  // namespace rnv
