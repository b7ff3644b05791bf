#include "rnv/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "bytes.hpp"
#include "parallel.hpp"

namespace rnv {

std::string to_string(SpeechType t) {
    switch (t) {
        case SpeechType::Silence: return "silence";
        case SpeechType::Sonorant: return "sonorant";
        case SpeechType::Obstruent: return "obstruent";
    }
    return "invalid";
}

SpeechType parse_speech_type(std::string_view name) {
    for (SpeechType t : kAllSpeechTypes) {
        if (name == to_string(t)) return t;
    }
    throw std::invalid_argument("unknown speech type \"" + std::string(name) + "\"");
}

namespace {

constexpr std::size_t kAssignChunk = 2048;

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

// Uniform double in [0, 1) built from raw engine output, so the sequence is
// identical across standard library implementations.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Assignment {
    std::vector<std::uint32_t> label;
    std::vector<double> distance;
    double inertia = 0.0;
};

Assignment assign_points(const FloatMatrix& frames, const FloatMatrix& centroids) {
    const std::size_t n = frames.rows();
    Assignment a;
    a.label.resize(n);
    a.distance.resize(n);
    const std::size_t n_chunks = (n + kAssignChunk - 1) / kAssignChunk;
    std::vector<double> partial(n_chunks, 0.0);
    detail::parallel_chunks(n, kAssignChunk, [&](std::size_t begin, std::size_t end) {
        double sum = 0.0;
        for (std::size_t t = begin; t < end; ++t) {
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_j = 0;
            for (std::size_t j = 0; j < centroids.rows(); ++j) {
                const double d = squared_distance(frames.row(t), centroids.row(j));
                if (d < best) {
                    best = d;
                    best_j = static_cast<std::uint32_t>(j);
                }
            }
            a.label[t] = best_j;
            a.distance[t] = best;
            sum += best;
        }
        partial[begin / kAssignChunk] = sum;
    });
    for (double p : partial) a.inertia += p;
    return a;
}

FloatMatrix kmeans_plus_plus(const FloatMatrix& frames, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = frames.rows();
    FloatMatrix centroids(0, frames.cols());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    auto add_center = [&](std::size_t idx) {
        centroids.push_row(frames.row(idx));
        const auto c = centroids.row(centroids.rows() - 1);
        detail::parallel_chunks(n, kAssignChunk, [&](std::size_t begin, std::size_t end) {
            for (std::size_t t = begin; t < end; ++t) d2[t] = std::min(d2[t], squared_distance(frames.row(t), c));
        });
    };

    add_center(std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n))));
    while (centroids.rows() < k) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t pick = n - 1;
        if (total > 0.0) {
            while (pick > 0 && d2[pick] == 0.0) --pick;
            const double target = uniform01(rng) * total;
            double cum = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                cum += d2[t];
                if (cum > target && d2[t] > 0.0) {
                    pick = t;
                    break;
                }
            }
        } else {
            // All remaining mass is zero: duplicates only.
            pick = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
        }
        add_center(pick);
    }
    return centroids;
}

}  // namespace

KMeansResult kmeans_fit(const FloatMatrix& frames, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    if (k == 0) throw std::invalid_argument("kmeans_fit: k must be at least 1");
    if (frames.rows() < k) {
        throw std::invalid_argument("kmeans_fit: " + std::to_string(frames.rows()) + " frames is fewer than k = " +
                                    std::to_string(k));
    }
    const std::size_t n = frames.rows();
    const std::size_t dim = frames.cols();
    std::mt19937_64 rng(seed);

    KMeansResult result;
    result.centroids = kmeans_plus_plus(frames, k, rng);
    Assignment current = assign_points(frames, result.centroids);
    result.inertia_history.push_back(current.inertia);

    for (std::size_t iter = 0; iter < options.max_iterations && current.inertia > 0.0; ++iter) {
        std::vector<double> sums(k * dim, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t t = 0; t < n; ++t) {
            const std::uint32_t j = current.label[t];
            ++counts[j];
            const auto x = frames.row(t);
            for (std::size_t d = 0; d < dim; ++d) sums[j * dim + d] += x[d];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;
            auto c = result.centroids.row(j);
            for (std::size_t d = 0; d < dim; ++d) {
                c[d] = static_cast<float>(sums[j * dim + d] / static_cast<double>(counts[j]));
            }
        }
        // Re-seed empty clusters at the points farthest from their (updated) centroid.
        std::vector<double> dist(n);
        bool any_empty = std::any_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; });
        if (any_empty) {
            for (std::size_t t = 0; t < n; ++t) {
                dist[t] = squared_distance(frames.row(t), result.centroids.row(current.label[t]));
            }
            for (std::size_t j = 0; j < k; ++j) {
                if (counts[j] != 0) continue;
                const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
                auto c = result.centroids.row(j);
                std::copy(frames.row(far).begin(), frames.row(far).end(), c.begin());
                dist[far] = -1.0;
            }
        }

        Assignment next = assign_points(frames, result.centroids);
        const double improvement = current.inertia - next.inertia;
        current = std::move(next);
        result.inertia_history.push_back(current.inertia);
        result.iterations = iter + 1;
        if (improvement < options.relative_tolerance * result.inertia_history[result.inertia_history.size() - 2]) {
            break;
        }
    }
    result.assignment = std::move(current.label);
    result.inertia = current.inertia;
    return result;
}

std::vector<std::uint32_t> ward_cluster_centroids(const FloatMatrix& centroids, std::size_t n_groups) {
    const std::size_t K = centroids.rows();
    if (n_groups == 0) throw std::invalid_argument("ward_cluster_centroids: n_groups must be positive");
    if (K < n_groups) {
        throw std::invalid_argument("ward_cluster_centroids: " + std::to_string(K) + " centroids is fewer than " +
                                    std::to_string(n_groups) + " groups");
    }
    const std::size_t dim = centroids.cols();

    std::vector<std::vector<double>> mean(K, std::vector<double>(dim));
    std::vector<double> size(K, 1.0);
    std::vector<bool> active(K, true);
    std::vector<std::size_t> owner(K);
    for (std::size_t i = 0; i < K; ++i) {
        owner[i] = i;
        for (std::size_t d = 0; d < dim; ++d) mean[i][d] = centroids(i, d);
    }

    auto ward = [&](std::size_t a, std::size_t b) {
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = mean[a][d] - mean[b][d];
            sq += diff * diff;
        }
        return size[a] * size[b] / (size[a] + size[b]) * sq;
    };

    Matrix<double> cost(K, K, 0.0);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = i + 1; j < K; ++j) cost(i, j) = ward(i, j);
    }

    for (std::size_t n_active = K; n_active > n_groups; --n_active) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0;
        std::size_t bj = 0;
        for (std::size_t i = 0; i < K; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < K; ++j) {
                if (active[j] && cost(i, j) < best) {
                    best = cost(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        // Merge bj into bi; bi keeps the lower index.
        const double total = size[bi] + size[bj];
        for (std::size_t d = 0; d < dim; ++d) {
            mean[bi][d] = (mean[bi][d] * size[bi] + mean[bj][d] * size[bj]) / total;
        }
        size[bi] = total;
        active[bj] = false;
        for (auto& o : owner) {
            if (o == bj) o = bi;
        }
        for (std::size_t m = 0; m < K; ++m) {
            if (!active[m] || m == bi) continue;
            if (m < bi) {
                cost(m, bi) = ward(m, bi);
            } else {
                cost(bi, m) = ward(bi, m);
            }
        }
    }

    std::vector<std::uint32_t> labels(K);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < K; ++i) {
        auto it = std::find(order.begin(), order.end(), owner[i]);
        if (it == order.end()) {
            order.push_back(owner[i]);
            it = order.end() - 1;
        }
        labels[i] = static_cast<std::uint32_t>(it - order.begin());
    }
    return labels;
}

std::array<SpeechType, kNumSpeechTypes> assign_speech_types(std::span<const std::uint32_t> frame_groups,
                                                            std::span<const FrameFlags> frame_flags) {
    if (frame_groups.size() != frame_flags.size()) {
        throw std::invalid_argument("assign_speech_types: group and flag counts differ");
    }
    std::array<double, kNumSpeechTypes> count{};
    std::array<double, kNumSpeechTypes> silent{};
    std::array<double, kNumSpeechTypes> voiced{};
    for (std::size_t t = 0; t < frame_groups.size(); ++t) {
        const auto g = frame_groups[t];
        if (g >= kNumSpeechTypes) throw std::invalid_argument("assign_speech_types: group label out of range");
        count[g] += 1.0;
        silent[g] += frame_flags[t].is_silence ? 1.0 : 0.0;
        voiced[g] += frame_flags[t].is_voiced ? 1.0 : 0.0;
    }
    for (std::size_t g = 0; g < kNumSpeechTypes; ++g) {
        if (count[g] == 0.0) {
            throw std::runtime_error("assign_speech_types: group " + std::to_string(g) + " has no training frames");
        }
        silent[g] /= count[g];
        voiced[g] /= count[g];
    }

    // Index of the strict maximum among candidates; throws on an exact tie.
    auto strict_argmax = [](const std::array<double, kNumSpeechTypes>& frac, const std::vector<std::size_t>& candidates,
                            const char* what) {
        std::size_t best = candidates.front();
        for (std::size_t c : candidates) {
            if (frac[c] > frac[best]) best = c;
        }
        for (std::size_t c : candidates) {
            if (c != best && frac[c] == frac[best]) {
                throw std::runtime_error(std::string("assign_speech_types: groups tie on ") + what +
                                         " fraction; more training data is needed");
            }
        }
        return best;
    };

    std::array<SpeechType, kNumSpeechTypes> types{};
    const std::size_t silence_group = strict_argmax(silent, {0, 1, 2}, "silence");
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < kNumSpeechTypes; ++g) {
        if (g != silence_group) rest.push_back(g);
    }
    const std::size_t sonorant_group = strict_argmax(voiced, rest, "voiced");
    for (std::size_t g = 0; g < kNumSpeechTypes; ++g) {
        types[g] = g == silence_group ? SpeechType::Silence
                   : g == sonorant_group ? SpeechType::Sonorant
                                         : SpeechType::Obstruent;
    }
    return types;
}

void SegmenterModel::validate() const {
    if (centroids.rows() == 0 || centroids.cols() == 0) throw std::invalid_argument("segmenter: empty codebook");
    if (type_of_centroid.size() != centroids.rows()) {
        throw std::invalid_argument("segmenter: type list length does not match centroid count");
    }
    for (SpeechType t : kAllSpeechTypes) {
        if (std::find(type_of_centroid.begin(), type_of_centroid.end(), t) == type_of_centroid.end()) {
            throw std::invalid_argument("segmenter: no centroid of type " + to_string(t));
        }
    }
    if (!(std::isfinite(sigma2) && sigma2 > 0.0F)) throw std::invalid_argument("segmenter: sigma2 must be positive");
    if (!(std::isfinite(frame_rate) && frame_rate > 0.0F)) {
        throw std::invalid_argument("segmenter: frame_rate must be positive");
    }
    for (float v : centroids.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("segmenter: non-finite centroid value");
    }
}

SegmenterModel train_segmenter(std::span<const FeatureSequence> sequences, const SegmenterTrainingOptions& options) {
    if (sequences.empty()) throw std::invalid_argument("train_segmenter: no training sequences");
    const std::size_t dim = sequences.front().dim();
    const float frame_rate = sequences.front().frame_rate();
    FloatMatrix frames(0, dim);
    std::vector<FrameFlags> flags;
    for (const auto& seq : sequences) {
        if (seq.dim() != dim) throw std::invalid_argument("train_segmenter: inconsistent feature dims");
        if (seq.frame_rate() != frame_rate) throw std::invalid_argument("train_segmenter: inconsistent frame rates");
        if (!seq.has_flags()) throw std::invalid_argument("train_segmenter: training sequence without flags");
        frames.data().insert(frames.data().end(), seq.frames().data().begin(), seq.frames().data().end());
        flags.insert(flags.end(), seq.flags()->begin(), seq.flags()->end());
    }
    frames = FloatMatrix(flags.size(), dim, std::move(frames.data()));

    KMeansResult km = kmeans_fit(frames, options.k, options.seed, options.kmeans);
    const auto group_of_centroid = ward_cluster_centroids(km.centroids, kNumSpeechTypes);
    std::vector<std::uint32_t> frame_groups(km.assignment.size());
    for (std::size_t t = 0; t < frame_groups.size(); ++t) frame_groups[t] = group_of_centroid[km.assignment[t]];
    const auto type_of_group = assign_speech_types(frame_groups, flags);

    SegmenterModel model;
    model.centroids = std::move(km.centroids);
    model.type_of_centroid.reserve(options.k);
    for (auto g : group_of_centroid) model.type_of_centroid.push_back(type_of_group[g]);
    const double mean_sq = km.inertia / static_cast<double>(frames.rows());
    model.sigma2 = static_cast<float>(std::max(mean_sq, 1e-12));
    model.frame_rate = frame_rate;
    model.validate();
    return model;
}

std::vector<std::uint8_t> encode_segmenter(const SegmenterModel& model) {
    model.validate();
    detail::ByteWriter w(24 + model.k() * (1 + model.dim() * 4));
    w.bytes("RNVS", 4);
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(model.dim()));
    w.u32(static_cast<std::uint32_t>(model.k()));
    w.f32(model.frame_rate);
    w.f32(model.sigma2);
    for (SpeechType t : model.type_of_centroid) w.u8(static_cast<std::uint8_t>(t));
    w.f32s(model.centroids.data());
    return w.take();
}

SegmenterModel decode_segmenter(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    if (!r.has(24)) throw std::runtime_error("RNVS: truncated header (offset " + std::to_string(bytes.size()) + ")");
    if (r.str(4) != "RNVS") throw std::runtime_error("RNVS: bad magic (offset 0)");
    const std::uint32_t version = r.u32();
    if (version != 1) throw std::runtime_error("RNVS: unsupported version " + std::to_string(version) + " (offset 4)");
    const std::uint32_t dim = r.u32();
    const std::uint32_t k = r.u32();
    SegmenterModel model;
    model.frame_rate = r.f32();
    model.sigma2 = r.f32();
    const std::uint64_t needed = static_cast<std::uint64_t>(k) * (1 + static_cast<std::uint64_t>(dim) * 4);
    if (r.remaining() < needed) {
        throw std::runtime_error("RNVS: truncated payload (offset " + std::to_string(bytes.size()) + ")");
    }
    model.type_of_centroid.reserve(k);
    for (std::uint32_t j = 0; j < k; ++j) {
        const std::uint8_t code = r.u8();
        if (code > 2) {
            throw std::runtime_error("RNVS: invalid type code " + std::to_string(code) + " (offset " +
                                     std::to_string(r.offset() - 1) + ")");
        }
        model.type_of_centroid.push_back(static_cast<SpeechType>(code));
    }
    model.centroids = FloatMatrix(k, dim);
    r.f32s(model.centroids.data());
    model.validate();
    return model;
}

void save_segmenter(const SegmenterModel& model, const std::filesystem::path& destination) {
    const auto bytes = encode_segmenter(model);
    write_file_atomic(destination, bytes);
}

SegmenterModel load_segmenter(const std::filesystem::path& source) { return decode_segmenter(read_file_bytes(source)); }

Matrix<double> class_log_probs(const SegmenterModel& model, const FeatureSequence& seq) {
    if (seq.dim() != model.dim()) {
        throw std::invalid_argument("class_log_probs: feature dim " + std::to_string(seq.dim()) +
                                    " does not match model dim " + std::to_string(model.dim()));
    }
    const std::size_t n = seq.n_frames();
    const std::size_t K = model.k();
    const double inv_two_sigma2 = 1.0 / (2.0 * static_cast<double>(model.sigma2));
    const double log_floor = std::log(kProbabilityFloor);
    Matrix<double> out(n, kNumSpeechTypes);
    detail::parallel_chunks(n, 256, [&](std::size_t begin, std::size_t end) {
        std::vector<double> logit(K);
        for (std::size_t t = begin; t < end; ++t) {
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < K; ++j) {
                logit[j] = -squared_distance(seq.frame(t), model.centroids.row(j)) * inv_two_sigma2;
                top = std::max(top, logit[j]);
            }
            std::array<double, kNumSpeechTypes> mass{};
            double total = 0.0;
            for (std::size_t j = 0; j < K; ++j) {
                const double e = std::exp(logit[j] - top);
                mass[index_of(model.type_of_centroid[j])] += e;
                total += e;
            }
            for (std::size_t c = 0; c < kNumSpeechTypes; ++c) {
                const double p = mass[c] / total;
                out(t, c) = p > kProbabilityFloor ? std::log(p) : log_floor;
            }
        }
    });
    return out;
}

Segmentation segment_dp(const Matrix<double>& log_probs, double penalty) {
    const std::size_t n = log_probs.rows();
    if (n == 0) throw std::invalid_argument("segment_dp: no frames");
    if (log_probs.cols() != kNumSpeechTypes) throw std::invalid_argument("segment_dp: expected 3 columns");
    if (!(penalty >= 0.0)) throw std::invalid_argument("segment_dp: penalty must be non-negative");

    // prefix[t][c] = sum of log_probs over frames [0, t) for class c.
    Matrix<double> prefix(n + 1, kNumSpeechTypes, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t c = 0; c < kNumSpeechTypes; ++c) prefix(t + 1, c) = prefix(t, c) + log_probs(t, c);
    }

    // best[e] = max over segmentations of [0, e). For a last segment [s, e) of
    // class c the score is best[s] - prefix[s][c] + prefix[e][c] - penalty, so
    // a running maximum of best[s] - prefix[s][c] over s < e suffices.
    std::vector<double> best(n + 1, 0.0);
    std::vector<std::size_t> back_start(n + 1, 0);
    std::vector<std::size_t> back_class(n + 1, 0);
    std::array<double, kNumSpeechTypes> run{};
    std::array<std::size_t, kNumSpeechTypes> run_start{};
    run.fill(-std::numeric_limits<double>::infinity());

    for (std::size_t e = 1; e <= n; ++e) {
        for (std::size_t c = 0; c < kNumSpeechTypes; ++c) {
            const double candidate = best[e - 1] - prefix(e - 1, c);
            if (candidate > run[c]) {
                run[c] = candidate;
                run_start[c] = e - 1;
            }
        }
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < kNumSpeechTypes; ++c) {
            const double score = run[c] + prefix(e, c) - penalty;
            if (score > top) {
                top = score;
                back_start[e] = run_start[c];
                back_class[e] = c;
            }
        }
        best[e] = top;
    }

    Segmentation reversed;
    for (std::size_t e = n; e > 0;) {
        const std::size_t s = back_start[e];
        reversed.push_back({static_cast<SpeechType>(back_class[e]), s, e});
        e = s;
    }
    Segmentation out;
    for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
        if (!out.empty() && out.back().type == it->type) {
            out.back().end = it->end;
        } else {
            out.push_back(*it);
        }
    }
    return out;
}

double segmentation_objective(const Matrix<double>& log_probs, const Segmentation& segmentation, double penalty) {
    double total = 0.0;
    for (const auto& seg : segmentation) {
        for (std::size_t t = seg.start; t < seg.end; ++t) total += log_probs(t, index_of(seg.type));
        total -= penalty;
    }
    return total;
}

void validate_segmentation(const Segmentation& segmentation, std::size_t n_frames) {
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < segmentation.size(); ++i) {
        const auto& seg = segmentation[i];
        if (seg.start != cursor) throw std::invalid_argument("segmentation: gap or overlap at frame " + std::to_string(cursor));
        if (seg.end <= seg.start) throw std::invalid_argument("segmentation: empty segment at frame " + std::to_string(cursor));
        if (i > 0 && segmentation[i - 1].type == seg.type) {
            throw std::invalid_argument("segmentation: adjacent segments share a type at frame " + std::to_string(cursor));
        }
        cursor = seg.end;
    }
    if (cursor != n_frames) {
        throw std::invalid_argument("segmentation covers " + std::to_string(cursor) + " of " + std::to_string(n_frames) +
                                    " frames");
    }
}

Segmentation segment_sequence(const SegmenterModel& model, const FeatureSequence& seq, double penalty) {
    if (seq.n_frames() == 0) return {};
    return segment_dp(class_log_probs(model, seq), penalty);
}

}  // namespace rnv
