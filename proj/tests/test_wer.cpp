#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rnv/wer.hpp"

using namespace rnv;

namespace {

const char* const kHallucinationReference = "This is not a program of socialized medicine.";
const char* const kHallucinationHypothesis =
    "DB, that\xE2\x80\x99s a program. I just, I, I just, I just, I just, I just, I just, I just, I just, I just, I just";

UtteranceRecord record(std::string id, Severity severity) {
    UtteranceRecord r;
    r.id = std::move(id);
    r.speaker = "spk";
    r.severity = severity;
    return r;
}

UtteranceScore scored(std::string id, std::size_t errors, std::size_t n_ref) {
    UtteranceScore s;
    s.id = std::move(id);
    s.counts = {errors, 0, 0, n_ref};
    return s;
}

}  // namespace

TEST_CASE("normalization") {
    CHECK(normalize_words("  Hello,  WORLD!! don't\tstop ") == std::vector<std::string>{"hello", "world", "don't", "stop"});
    CHECK(normalize_words("").empty());
    CHECK(normalize_words("caf\xC3\xA9 au lait") == std::vector<std::string>{"caf", "au", "lait"});
}

TEST_CASE("basic scores") {
    CHECK(score_wer("this is a test", "this is a test") == WerCounts{0, 0, 0, 4});
    const auto empty_hyp = score_wer("a b c", "");
    CHECK(empty_hyp == WerCounts{0, 3, 0, 3});
    CHECK(empty_hyp.wer() == 1.0);
    CHECK(score_wer("", "x y") == WerCounts{0, 0, 2, 0});
    CHECK(score_wer("", "x y").wer() == 2.0);
    CHECK(score_wer("a b c d", "a x c d").substitutions == 1);
}

TEST_CASE("hallucinated repetition pair") {
    const auto ref = normalize_words(kHallucinationReference);
    const auto hyp = normalize_words(kHallucinationHypothesis);
    CHECK(ref.size() == 8);
    CHECK(hyp.size() == 26);
    const auto c = score_wer(kHallucinationReference, kHallucinationHypothesis);
    CHECK(c.errors() == oracle::edit_distance(ref, hyp));
    CHECK(c == WerCounts{6, 0, 18, 8});
    CHECK(c.wer() == 3.0);
}

TEST_CASE("random pairs against the recursive oracle") {
    std::mt19937_64 rng(44);
    const std::vector<std::string> vocab{"a", "b", "c", "d", "it's", "the", "x"};
    std::uniform_int_distribution<std::size_t> len(0, 12);
    std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::string a;
        std::string b;
        for (std::size_t i = len(rng); i > 0; --i) a += vocab[word(rng)] + (i % 3 == 0 ? ", " : " ");
        for (std::size_t i = len(rng); i > 0; --i) b += vocab[word(rng)] + " ";
        const auto c = score_wer(a, b);
        CHECK(c.errors() == oracle::edit_distance(normalize_words(a), normalize_words(b)));
        CHECK(c.n_ref == normalize_words(a).size());
        // Every hypothesis token is either matched, substituted or inserted.
        CHECK(c.n_ref - c.deletions + c.insertions == normalize_words(b).size());
    }
}

TEST_CASE("swapping arguments swaps deletions and insertions") {
    const auto ab = score_wer("the cat sat on the mat", "the cat mat");
    const auto ba = score_wer("the cat mat", "the cat sat on the mat");
    CHECK(ab.deletions == 3);
    CHECK(ab.insertions == 0);
    CHECK(ba.deletions == ab.insertions);
    CHECK(ba.insertions == ab.deletions);
    CHECK(ab.wer() != ba.wer());
}

TEST_CASE("pooled aggregation") {
    const std::vector<UtteranceRecord> manifest{record("u1", Severity::Severe), record("u2", Severity::Severe),
                                                record("u3", Severity::Control), record("u4", Severity::Mild)};
    SUBCASE("pooled rate over one group") {
        const std::vector<UtteranceScore> scores{scored("u1", 1, 4), scored("u2", 3, 6)};
        const auto r = aggregate_report(scores, manifest);
        REQUIRE(r.groups.size() == 1);
        CHECK(r.groups[0].group == "severe");
        CHECK(r.groups[0].wer() == doctest::Approx(0.4));
        const double mean = (1.0 / 4.0 + 3.0 / 6.0) / 2.0;
        CHECK(r.groups[0].wer() != doctest::Approx(mean));
    }
    SUBCASE("two groups and an overall row; empty groups are absent") {
        const std::vector<UtteranceScore> scores{scored("u1", 2, 5), scored("u3", 1, 5), scored("u4", 0, 0)};
        const auto r = aggregate_report(scores, manifest);
        REQUIRE(r.groups.size() == 2);
        REQUIRE(r.overall.has_value());
        CHECK(r.overall->wer() == doctest::Approx(0.3));
        CHECK(r.overall->n_utterances == 3);
        const auto json = report_to_json(r);
        CHECK(json.find("\"mild\"") == std::string::npos);
        CHECK(report_groups_csv(r).find("overall") != std::string::npos);
        const auto rows = report_utterances_csv(r);
        CHECK(std::count(rows.begin(), rows.end(), '\n') == 4);
    }
    SUBCASE("unknown id") {
        const std::vector<UtteranceScore> scores{scored("nope", 1, 1)};
        CHECK_THROWS_WITH(aggregate_report(scores, manifest), doctest::Contains("nope"));
    }
    SUBCASE("no reference words at all") {
        const std::vector<UtteranceScore> scores{scored("u1", 0, 0)};
        CHECK_FALSE(aggregate_report(scores, manifest).overall.has_value());
    }
}

TEST_CASE("CSV quoting") {
    UtteranceScore s;
    s.id = "u1";
    s.reference = "say \"hi\", then go";
    s.hypothesis = "say hi";
    s.counts = score_wer(s.reference, s.hypothesis);
    const std::vector<UtteranceRecord> manifest{record("u1", Severity::Control)};
    const auto csv = report_utterances_csv(aggregate_report(std::vector<UtteranceScore>{s}, manifest));
    CHECK(csv.find("\"say \"\"hi\"\", then go\"") != std::string::npos);
}
