#include "rnv/knnvc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "parallel.hpp"
#include "rnv/log.hpp"

namespace rnv {

MatchingPool build_pool(std::span<const FeatureSequence> sequences) {
    if (sequences.empty()) throw std::invalid_argument("build_pool: no sequences");
    const std::size_t dim = sequences.front().dim();
    MatchingPool pool;
    std::vector<float> data;
    for (const auto& seq : sequences) {
        if (seq.dim() != dim) {
            throw std::invalid_argument("build_pool: mixed feature dims " + std::to_string(dim) + " and " +
                                        std::to_string(seq.dim()));
        }
        for (std::size_t t = 0; t < seq.n_frames(); ++t) {
            const auto f = seq.frame(t);
            double sq = 0.0;
            for (float v : f) sq += static_cast<double>(v) * v;
            if (sq == 0.0) {
                ++pool.dropped_zero_frames;
                continue;
            }
            data.insert(data.end(), f.begin(), f.end());
            pool.norms.push_back(std::sqrt(sq));
        }
    }
    if (pool.norms.empty()) {
        throw std::invalid_argument(pool.dropped_zero_frames > 0 ? "build_pool: every pool frame is zero"
                                                                 : "build_pool: no frames");
    }
    if (pool.dropped_zero_frames > 0) {
        warn("build_pool: dropped " + std::to_string(pool.dropped_zero_frames) + " zero frame(s)");
    }
    pool.frames = FloatMatrix(pool.norms.size(), dim, std::move(data));
    return pool;
}

namespace {

struct Candidate {
    double similarity;
    std::size_t index;
};

// Higher similarity first, then lower pool index.
bool ranks_before(const Candidate& a, const Candidate& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.index < b.index);
}

// Sorted top-k list; insertion is linear in k, which is small in practice.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

    void offer(const Candidate& c) {
        if (items_.size() == k_ && !ranks_before(c, items_.back())) return;
        auto pos = std::upper_bound(items_.begin(), items_.end(), c, ranks_before);
        items_.insert(pos, c);
        if (items_.size() > k_) items_.pop_back();
    }
    const std::vector<Candidate>& items() const { return items_; }

private:
    std::size_t k_;
    std::vector<Candidate> items_;
};

constexpr std::size_t kQueryBlock = 16;
constexpr std::size_t kPoolBlock = 512;

}  // namespace

FeatureSequence convert_sequence(const FeatureSequence& seq, const MatchingPool& pool, std::size_t k) {
    if (k == 0) throw std::invalid_argument("convert_sequence: k must be at least 1");
    if (pool.size() == 0) throw std::invalid_argument("convert_sequence: empty pool");
    if (seq.dim() != pool.dim()) {
        throw std::invalid_argument("convert_sequence: feature dim " + std::to_string(seq.dim()) +
                                    " does not match pool dim " + std::to_string(pool.dim()));
    }
    if (k > pool.size()) {
        warn("convert_sequence: k = " + std::to_string(k) + " exceeds pool size " + std::to_string(pool.size()) +
             "; clamped");
        k = pool.size();
    }

    const std::size_t n = seq.n_frames();
    const std::size_t dim = seq.dim();
    FloatMatrix out(n, dim);
    std::vector<char> passthrough(n, 0);

    detail::parallel_chunks(n, kQueryBlock, [&](std::size_t begin, std::size_t end) {
        const std::size_t nq = end - begin;
        std::vector<double> qnorm(nq);
        std::vector<TopK> best(nq, TopK(k));
        for (std::size_t q = 0; q < nq; ++q) {
            double sq = 0.0;
            for (float v : seq.frame(begin + q)) sq += static_cast<double>(v) * v;
            qnorm[q] = std::sqrt(sq);
        }
        // Blocked scan: a block of queries against a block of pool rows.
        for (std::size_t p0 = 0; p0 < pool.size(); p0 += kPoolBlock) {
            const std::size_t p1 = std::min(pool.size(), p0 + kPoolBlock);
            for (std::size_t q = 0; q < nq; ++q) {
                if (qnorm[q] == 0.0) continue;
                const auto x = seq.frame(begin + q);
                for (std::size_t i = p0; i < p1; ++i) {
                    const auto f = pool.frames.row(i);
                    double dot = 0.0;
                    for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(x[d]) * f[d];
                    best[q].offer({dot / (qnorm[q] * pool.norms[i]), i});
                }
            }
        }
        std::vector<double> acc(dim);
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t t = begin + q;
            auto o = out.row(t);
            if (qnorm[q] == 0.0) {
                const auto x = seq.frame(t);
                std::copy(x.begin(), x.end(), o.begin());
                passthrough[t] = 1;
                continue;
            }
            const auto& items = best[q].items();
            if (items.size() == 1) {
                const auto f = pool.frames.row(items.front().index);
                std::copy(f.begin(), f.end(), o.begin());
                continue;
            }
            double weight_sum = 0.0;
            for (const auto& c : items) weight_sum += std::max(c.similarity, 0.0);
            const bool uniform = weight_sum == 0.0;
            if (uniform) weight_sum = static_cast<double>(items.size());
            std::fill(acc.begin(), acc.end(), 0.0);
            for (const auto& c : items) {
                const double w = uniform ? 1.0 : std::max(c.similarity, 0.0);
                if (w == 0.0) continue;
                const auto f = pool.frames.row(c.index);
                for (std::size_t d = 0; d < dim; ++d) acc[d] += w * f[d];
            }
            for (std::size_t d = 0; d < dim; ++d) o[d] = static_cast<float>(acc[d] / weight_sum);
        }
    });

    const auto zero_frames = static_cast<std::size_t>(std::count(passthrough.begin(), passthrough.end(), 1));
    if (zero_frames > 0) {
        warn("convert_sequence: " + std::to_string(zero_frames) + " zero source frame(s) copied through unchanged");
    }
    return FeatureSequence(seq.frame_rate(), std::move(out), seq.flags());
}

}  // namespace rnv
