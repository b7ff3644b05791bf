#pragma once

#include <span>
#include <vector>

#include "rnv/featstore.hpp"

namespace rnv {

inline constexpr std::size_t kDefaultNeighbours = 8;

// Target-speaker frame bank for exact cosine kNN.
struct MatchingPool {
    FloatMatrix frames;
    std::vector<double> norms;
    std::size_t dropped_zero_frames = 0;

    std::size_t size() const noexcept { return frames.rows(); }
    std::size_t dim() const noexcept { return frames.cols(); }
};

// Concatenates the sequences, dropping all-zero frames (counted and warned).
MatchingPool build_pool(std::span<const FeatureSequence> sequences);

// Replaces each source frame by the similarity-weighted mean of its k most
// cosine-similar pool frames. Weights are max(similarity, 0), falling back
// to uniform when all are zero; ties go to the lower pool index. k > N is
// clamped with a warning; zero source frames pass through unchanged.
FeatureSequence convert_sequence(const FeatureSequence& seq, const MatchingPool& pool,
                                 std::size_t k = kDefaultNeighbours);

}  // namespace rnv
