#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rnv/featstore.hpp"

namespace rnv {

struct WerCounts {
    std::size_t substitutions = 0;
    std::size_t deletions = 0;
    std::size_t insertions = 0;
    std::size_t n_ref = 0;

    std::size_t errors() const noexcept { return substitutions + deletions + insertions; }
    double wer() const noexcept {
        return static_cast<double>(errors()) / static_cast<double>(std::max<std::size_t>(1, n_ref));
    }
    friend bool operator==(const WerCounts&, const WerCounts&) = default;
};

// Lowercase, map every byte outside [a-z0-9'] to a space, split on whitespace.
std::vector<std::string> normalize_words(std::string_view text);

// Unit-cost Levenshtein alignment over normalized tokens. Among optimal
// alignments the backtrace prefers match/substitution, then deletion, then
// insertion, which fixes the S/D/I split.
WerCounts score_wer(std::string_view reference, std::string_view hypothesis);

struct UtteranceScore {
    std::string id;
    std::string reference;
    std::string hypothesis;
    WerCounts counts;
};

struct GroupWer {
    std::string group;
    std::size_t n_utterances = 0;
    std::size_t errors = 0;
    std::size_t n_ref = 0;

    double wer() const noexcept { return static_cast<double>(errors) / static_cast<double>(n_ref); }
};

struct EvalReport {
    std::vector<UtteranceScore> utterances;
    // One row per severity with at least one reference word, in severity order.
    std::vector<GroupWer> groups;
    // Empty when no utterance has reference words.
    std::optional<GroupWer> overall;
};

// Pooled WER: sum of errors over sum of reference words, per severity group
// and overall. Throws if a scored id is absent from the manifest.
EvalReport aggregate_report(std::span<const UtteranceScore> scores, std::span<const UtteranceRecord> manifest);

std::string report_to_json(const EvalReport& report);
std::string report_utterances_csv(const EvalReport& report);
std::string report_groups_csv(const EvalReport& report);

}  // namespace rnv
