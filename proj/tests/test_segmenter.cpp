#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rnv/segmenter.hpp"
#include "synthetic.hpp"
#include "test_helpers.hpp"

using namespace rnv;

namespace {

FloatMatrix blobs(std::mt19937_64& rng, const std::vector<std::vector<float>>& centres, std::size_t per_blob,
                  float sigma, std::vector<std::vector<double>>* means = nullptr) {
    std::normal_distribution<float> normal(0.0F, sigma);
    FloatMatrix m(0, centres.front().size());
    if (means) means->assign(centres.size(), std::vector<double>(centres.front().size(), 0.0));
    for (std::size_t b = 0; b < centres.size(); ++b) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            std::vector<float> p = centres[b];
            for (auto& x : p) x += normal(rng);
            if (means) {
                for (std::size_t d = 0; d < p.size(); ++d) (*means)[b][d] += p[d] / static_cast<double>(per_blob);
            }
            m.push_row(p);
        }
    }
    return m;
}

SegmenterModel toy_model(float sigma2 = 1.0F) {
    SegmenterModel m;
    m.centroids = FloatMatrix(3, 2, std::vector<float>{0, 0, 100, 0, 0, 100});
    m.type_of_centroid = {SpeechType::Silence, SpeechType::Sonorant, SpeechType::Obstruent};
    m.sigma2 = sigma2;
    return m;
}

}  // namespace

TEST_CASE("kmeans: every distinct point becomes a centroid when k = n") {
    std::mt19937_64 rng(5);
    const auto seq = testing::random_sequence(rng, 100, 4);
    const auto r = kmeans_fit(seq.frames(), 100, 42);
    CHECK(r.inertia == 0.0);
    std::vector<std::uint32_t> sorted = r.assignment;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("kmeans: recovers well-separated blob means") {
    std::mt19937_64 rng(11);
    std::vector<std::vector<double>> means;
    const auto pts = blobs(rng, {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}}, 200, 0.1F, &means);
    const auto r = kmeans_fit(pts, 3, 3);
    for (const auto& mean : means) {
        double best = 1e9;
        for (std::size_t j = 0; j < 3; ++j) {
            double sq = 0.0;
            for (std::size_t d = 0; d < 3; ++d) sq += std::pow(r.centroids(j, d) - mean[d], 2);
            best = std::min(best, std::sqrt(sq));
        }
        CHECK(best < 0.1);
    }
}

TEST_CASE("kmeans: deterministic for a fixed seed, inertia never increases") {
    std::mt19937_64 rng(8);
    const auto seq = testing::random_sequence(rng, 2000, 6);
    const auto a = kmeans_fit(seq.frames(), 100, 17);
    const auto b = kmeans_fit(seq.frames(), 100, 17);
    CHECK(a.centroids == b.centroids);
    CHECK(a.assignment == b.assignment);
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
        CHECK(a.inertia_history[i] <= a.inertia_history[i - 1] * (1.0 + 1e-12));
    }
    CHECK(a.inertia <= a.inertia_history.front());
}

TEST_CASE("kmeans: empty clusters are re-seeded") {
    // Heavy duplication leaves k-means++ with zero residual mass early.
    FloatMatrix pts(0, 1);
    for (int i = 0; i < 50; ++i) pts.push_row(std::vector<float>{0.0F});
    for (int i = 0; i < 3; ++i) pts.push_row(std::vector<float>{static_cast<float>(10 + i)});
    const auto r = kmeans_fit(pts, 4, 1);
    CHECK(r.inertia == 0.0);
    CHECK_THROWS_AS(kmeans_fit(pts, 54, 1), std::invalid_argument);
    CHECK_THROWS_AS(kmeans_fit(pts, 0, 1), std::invalid_argument);
}

TEST_CASE("ward: bundle membership is recovered") {
    std::mt19937_64 rng(21);
    const auto pts = blobs(rng, {{0, 0}, {50, 0}, {0, 50}}, 10, 1.0F);
    const auto labels = ward_cluster_centroids(pts, 3);
    for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t i = 1; i < 10; ++i) CHECK(labels[b * 10 + i] == labels[b * 10]);
    }
    CHECK(labels[0] != labels[10]);
    CHECK(labels[10] != labels[20]);
    CHECK(labels[0] != labels[20]);
}

TEST_CASE("ward: small and degenerate inputs") {
    const FloatMatrix three(3, 1, std::vector<float>{1, 5, 9});
    CHECK(ward_cluster_centroids(three, 3) == std::vector<std::uint32_t>{0, 1, 2});
    CHECK_THROWS_AS(ward_cluster_centroids(three, 4), std::invalid_argument);

    // Duplicated rows end up together.
    const FloatMatrix dup(6, 1, std::vector<float>{0, 3, 3, 7, 0, 12});
    const auto labels = ward_cluster_centroids(dup, 3);
    CHECK(labels[1] == labels[2]);
    CHECK(labels[0] == labels[4]);
}

TEST_CASE("speech type assignment") {
    std::vector<std::uint32_t> groups;
    std::vector<FrameFlags> flags;
    auto add = [&](std::uint32_t g, std::size_t n, std::size_t n_silent, std::size_t n_voiced) {
        for (std::size_t i = 0; i < n; ++i) {
            groups.push_back(g);
            flags.push_back({i < n_silent, i >= n_silent && i < n_silent + n_voiced});
        }
    };
    SUBCASE("forced by the rule") {
        add(0, 10, 9, 0);  // A: 90% silent
        add(1, 10, 0, 8);  // B: 80% voiced
        add(2, 10, 0, 0);
        const auto t = assign_speech_types(groups, flags);
        CHECK(t[0] == SpeechType::Silence);
        CHECK(t[1] == SpeechType::Sonorant);
        CHECK(t[2] == SpeechType::Obstruent);
    }
    SUBCASE("tie on silence fraction") {
        add(0, 10, 9, 0);
        add(1, 10, 9, 0);
        add(2, 10, 1, 0);
        CHECK_THROWS_WITH(assign_speech_types(groups, flags), doctest::Contains("tie"));
    }
    SUBCASE("tie on voiced fraction") {
        add(0, 10, 9, 0);
        add(1, 10, 0, 5);
        add(2, 10, 0, 5);
        CHECK_THROWS_WITH(assign_speech_types(groups, flags), doctest::Contains("voiced"));
    }
    SUBCASE("planted structure in a randomized corpus") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        // Planted rates: group 2 silent 0.8, group 0 voiced 0.7, group 1 voiced 0.3.
        const std::array<double, 3> p_silent{0.1, 0.2, 0.8};
        const std::array<double, 3> p_voiced{0.7, 0.3, 0.1};
        for (int i = 0; i < 3000; ++i) {
            const auto g = static_cast<std::uint32_t>(i % 3);
            const bool silent = u(rng) < p_silent[g];
            groups.push_back(g);
            flags.push_back({silent, !silent && u(rng) < p_voiced[g] / (1.0 - p_silent[g])});
        }
        const auto t = assign_speech_types(groups, flags);
        CHECK(t[2] == SpeechType::Silence);
        CHECK(t[0] == SpeechType::Sonorant);
        CHECK(t[1] == SpeechType::Obstruent);
    }
}

TEST_CASE("class log-probabilities") {
    SUBCASE("dominated softmax") {
        const auto m = toy_model(1.0F);
        FeatureSequence seq(50.0F, FloatMatrix(1, 2, std::vector<float>{100, 0}));
        const auto lp = class_log_probs(m, seq);
        CHECK(std::exp(lp(0, index_of(SpeechType::Sonorant))) >= 0.99);
    }
    SUBCASE("equidistant frame splits evenly") {
        const auto m = toy_model(100.0F);
        FeatureSequence seq(50.0F, FloatMatrix(1, 2, std::vector<float>{50, 0}));
        const auto lp = class_log_probs(m, seq);
        CHECK(std::fabs(std::exp(lp(0, 0)) - std::exp(lp(0, 1))) <= 1e-9);
    }
    SUBCASE("rows sum to one and respect the floor") {
        std::mt19937_64 rng(4);
        for (int trial = 0; trial < 20; ++trial) {
            SegmenterModel m;
            m.centroids = testing::random_sequence(rng, 12, 5).frames();
            for (std::size_t j = 0; j < 12; ++j) m.type_of_centroid.push_back(static_cast<SpeechType>(j % 3));
            m.sigma2 = 0.05F + static_cast<float>(trial) * 0.2F;
            const auto seq = testing::random_sequence(rng, 30, 5);
            const auto lp = class_log_probs(m, seq);
            for (std::size_t t = 0; t < 30; ++t) {
                double sum = 0.0;
                for (std::size_t c = 0; c < 3; ++c) {
                    sum += std::exp(lp(t, c));
                    CHECK(lp(t, c) >= std::log(kProbabilityFloor));
                }
                CHECK(std::fabs(sum - 1.0) <= 1e-6);
            }
        }
    }
    SUBCASE("invariant to reordering centroids within a class") {
        std::mt19937_64 rng(10);
        SegmenterModel m;
        m.centroids = testing::random_sequence(rng, 9, 3).frames();
        m.type_of_centroid = {SpeechType::Silence, SpeechType::Sonorant, SpeechType::Obstruent,
                              SpeechType::Silence, SpeechType::Sonorant, SpeechType::Obstruent,
                              SpeechType::Silence, SpeechType::Sonorant, SpeechType::Obstruent};
        SegmenterModel swapped = m;
        // Swap centroids 0 and 6 (both Silence) and 1 and 4 (both Sonorant).
        for (auto [a, b] : {std::pair{0, 6}, std::pair{1, 4}}) {
            for (std::size_t d = 0; d < 3; ++d) std::swap(swapped.centroids(a, d), swapped.centroids(b, d));
        }
        const auto seq = testing::random_sequence(rng, 20, 3);
        const auto a = class_log_probs(m, seq);
        const auto b = class_log_probs(swapped, seq);
        for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(class_log_probs(toy_model(), FeatureSequence(50.0F, FloatMatrix(1, 3))), std::invalid_argument);
    }
}

TEST_CASE("segment_dp edge cases") {
    SUBCASE("uniformly sonorant input is one segment") {
        Matrix<double> lp(20, 3);
        for (std::size_t t = 0; t < 20; ++t) {
            lp(t, 0) = std::log(0.05);
            lp(t, 1) = std::log(0.9);
            lp(t, 2) = std::log(0.05);
        }
        const auto seg = segment_dp(lp, 3.0);
        REQUIRE(seg.size() == 1);
        CHECK(seg[0] == Segment{SpeechType::Sonorant, 0, 20});
    }
    SUBCASE("zero penalty gives merged per-frame argmax") {
        std::mt19937_64 rng(2);
        const auto lp = synth::random_log_probs(rng, 40);
        const auto seg = segment_dp(lp, 0.0);
        validate_segmentation(seg, 40);
        for (const auto& s : seg) {
            for (std::size_t t = s.start; t < s.end; ++t) {
                const auto c = index_of(s.type);
                for (std::size_t o = 0; o < 3; ++o) CHECK(lp(t, c) >= lp(t, o));
            }
        }
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(segment_dp(Matrix<double>(0, 3), 1.0), std::invalid_argument);
        CHECK_THROWS_AS(segment_dp(Matrix<double>(2, 3), -1.0), std::invalid_argument);
    }
}

TEST_CASE("segment_dp matches exhaustive enumeration") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> len(1, 8);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = len(rng);
        const auto lp = synth::dyadic_log_probs(rng, n);
        for (double gamma : {0.0, 1.0, 3.0}) {
            const auto seg = segment_dp(lp, gamma);
            validate_segmentation(seg, n);
            CHECK(segmentation_objective(lp, seg, gamma) == oracle::best_segmentation_objective(lp, gamma));
        }
    }
}

TEST_CASE("segment count is non-increasing in the penalty") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const auto lp = synth::random_log_probs(rng, 60);
        std::size_t previous = std::numeric_limits<std::size_t>::max();
        for (double gamma : {0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 50.0}) {
            const auto seg = segment_dp(lp, gamma);
            validate_segmentation(seg, 60);
            CHECK(seg.size() <= previous);
            previous = seg.size();
        }
    }
}

TEST_CASE("segmenter training on a planted corpus and model file round trip") {
    const auto cb = synth::make_codebook(1);
    const auto corpus = synth::make_corpus(cb, {{0.3, 0.2, 0.1}}, 2, 20);
    std::vector<FeatureSequence> seqs;
    for (const auto& u : corpus) seqs.push_back(u.seq);
    const auto model = train_segmenter(seqs, {.k = 30, .seed = 9});
    CHECK(model.k() == 30);
    CHECK(model.sigma2 > 0.0F);

    std::size_t agree = 0;
    std::size_t total = 0;
    for (const auto& u : corpus) {
        const auto seg = segment_sequence(model, u.seq);
        validate_segmentation(seg, u.seq.n_frames());
        for (const auto& truth : u.truth) {
            for (std::size_t t = truth.start; t < truth.end; ++t) {
                const auto it = std::find_if(seg.begin(), seg.end(), [&](const Segment& s) { return t < s.end; });
                agree += it->type == truth.type ? 1 : 0;
                ++total;
            }
        }
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(total) > 0.99);

    testing::TempDir dir("seg");
    save_segmenter(model, dir / "m.rnvs");
    CHECK(load_segmenter(dir / "m.rnvs") == model);

    auto bytes = encode_segmenter(model);
    CHECK(bytes.size() == 24 + 30 + 30 * 16 * 4);
    bytes[0] = 'X';
    CHECK_THROWS(decode_segmenter(bytes));
    bytes = encode_segmenter(model);
    bytes.resize(bytes.size() - 1);
    CHECK_THROWS_WITH(decode_segmenter(bytes), doctest::Contains("truncated"));
}

TEST_CASE("training requires flags") {
    std::mt19937_64 rng(1);
    std::vector<FeatureSequence> seqs{testing::random_sequence(rng, 50, 3, false)};
    CHECK_THROWS_AS(train_segmenter(seqs, {.k = 5}), std::invalid_argument);
}
