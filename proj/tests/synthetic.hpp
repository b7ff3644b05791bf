#pragma once

// Synthetic speakers: frames are noisy draws around planted per-type
// centroids, and segment durations follow planted gamma distributions.

#include <array>
#include <random>
#include <vector>

#include "rnv/featstore.hpp"
#include "rnv/segmenter.hpp"

namespace synth {

struct Codebook {
    std::size_t dim = 16;
    // centroids[type] = list of planted centroids for that speech type.
    std::array<std::vector<std::vector<float>>, 3> centroids;
    float noise = 0.3F;
};

// Each type gets a far-apart centre; its planted centroids scatter around it.
inline Codebook make_codebook(std::uint64_t seed, std::size_t dim = 16, std::size_t per_type = 4) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    Codebook cb;
    cb.dim = dim;
    for (std::size_t type = 0; type < 3; ++type) {
        std::vector<float> centre(dim, 0.0F);
        centre[type] = 20.0F;
        centre[3 + type] = 5.0F;
        for (std::size_t c = 0; c < per_type; ++c) {
            std::vector<float> v(centre);
            for (auto& x : v) x += 1.5F * normal(rng);
            cb.centroids[type].push_back(std::move(v));
        }
    }
    return cb;
}

struct SpeakerRhythm {
    // Mean segment duration in seconds per type (silence, sonorant, obstruent).
    std::array<double, 3> mean_seconds;
    double shape = 6.0;
};

struct Utterance {
    rnv::FeatureSequence seq;
    rnv::Segmentation truth;
};

// An utterance is: silence, then words separated by silence, then silence.
// A word is 1-3 syllables, each an obstruent followed by a sonorant.
inline Utterance make_utterance(const Codebook& cb, const SpeakerRhythm& rhythm, std::mt19937_64& rng,
                                float frame_rate = 50.0F, std::size_t n_words = 4) {
    std::normal_distribution<float> normal(0.0F, 1.0F);
    std::uniform_int_distribution<int> syllables(1, 3);
    std::vector<rnv::SpeechType> plan{rnv::SpeechType::Silence};
    for (std::size_t w = 0; w < n_words; ++w) {
        if (w > 0) plan.push_back(rnv::SpeechType::Silence);
        const int n_syl = syllables(rng);
        for (int s = 0; s < n_syl; ++s) {
            plan.push_back(rnv::SpeechType::Obstruent);
            plan.push_back(rnv::SpeechType::Sonorant);
        }
    }
    plan.push_back(rnv::SpeechType::Silence);

    rnv::FloatMatrix frames(0, cb.dim);
    std::vector<rnv::FrameFlags> flags;
    rnv::Segmentation truth;
    for (auto type : plan) {
        const auto t = rnv::index_of(type);
        std::gamma_distribution<double> dur(rhythm.shape, rhythm.mean_seconds[t] / rhythm.shape);
        const auto len = static_cast<std::size_t>(std::max(1.0, std::round(dur(rng) * frame_rate)));
        std::uniform_int_distribution<std::size_t> pick(0, cb.centroids[t].size() - 1);
        const auto& centroid = cb.centroids[t][pick(rng)];
        const std::size_t start = frames.rows();
        for (std::size_t i = 0; i < len; ++i) {
            std::vector<float> f(centroid);
            for (auto& x : f) x += cb.noise * normal(rng);
            frames.push_row(f);
            flags.push_back({type == rnv::SpeechType::Silence, type == rnv::SpeechType::Sonorant});
        }
        truth.push_back({type, start, frames.rows()});
    }
    return {rnv::FeatureSequence(frame_rate, std::move(frames), std::move(flags)), std::move(truth)};
}

inline std::vector<Utterance> make_corpus(const Codebook& cb, const SpeakerRhythm& rhythm, std::uint64_t seed,
                                          std::size_t n_utterances) {
    std::mt19937_64 rng(seed);
    std::vector<Utterance> out;
    for (std::size_t i = 0; i < n_utterances; ++i) out.push_back(make_utterance(cb, rhythm, rng));
    return out;
}

// Sonorants per second implied by the planted segment layout.
inline double planted_rate(const std::vector<Utterance>& corpus) {
    std::size_t sonorants = 0;
    std::size_t frames = 0;
    float rate = 50.0F;
    for (const auto& u : corpus) {
        frames += u.seq.n_frames();
        rate = u.seq.frame_rate();
        for (const auto& s : u.truth) sonorants += s.type == rnv::SpeechType::Sonorant ? 1 : 0;
    }
    return static_cast<double>(sonorants) / (static_cast<double>(frames) / rate);
}

inline rnv::Matrix<double> random_log_probs(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    rnv::Matrix<double> lp(n, 3);
    for (std::size_t t = 0; t < n; ++t) {
        std::array<double, 3> p{u(rng) + 1e-3, u(rng) + 1e-3, u(rng) + 1e-3};
        const double z = p[0] + p[1] + p[2];
        for (std::size_t c = 0; c < 3; ++c) lp(t, c) = std::log(p[c] / z);
    }
    return lp;
}

// Log-probabilities rounded to multiples of 2^-20 so that every partial sum
// is exact in double precision; objective comparisons can then be exact.
inline rnv::Matrix<double> dyadic_log_probs(std::mt19937_64& rng, std::size_t n) {
    auto lp = random_log_probs(rng, n);
    for (auto& v : lp.data()) v = std::round(v * 1048576.0) / 1048576.0;
    return lp;
}

}  // namespace synth

#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace synth {

// Writes each utterance as <dir>/<prefix><i>.rnvf and appends manifest lines
// (relative feature paths) to `manifest_lines`.
inline void write_corpus(const std::vector<Utterance>& corpus, const std::filesystem::path& dir,
                         const std::string& prefix, const std::string& speaker, const std::string& severity,
                         std::string& manifest_lines, bool with_flags = true) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const std::string id = prefix + std::to_string(i);
        const auto& u = corpus[i];
        rnv::FeatureSequence seq = with_flags ? u.seq : rnv::FeatureSequence(u.seq.frame_rate(), u.seq.frames());
        rnv::write_rnvf(seq, dir / (id + ".rnvf"));
        nlohmann::json line{{"id", id},
                            {"speaker", speaker},
                            {"severity", severity},
                            {"feature_path", id + ".rnvf"},
                            {"transcript", "utterance " + std::to_string(i)}};
        manifest_lines += line.dump() + "\n";
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

}  // namespace synth
