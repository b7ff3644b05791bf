#include "rnv/wer.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "csv.hpp"
#include "json.hpp"

namespace rnv {

std::vector<std::string> normalize_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        const char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        const bool keep = (lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9') || lower == '\'';
        if (keep) {
            current.push_back(lower);
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

WerCounts score_wer(std::string_view reference, std::string_view hypothesis) {
    const auto ref = normalize_words(reference);
    const auto hyp = normalize_words(hypothesis);
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();

    // cost(i, j): edit distance between ref[0, i) and hyp[0, j).
    std::vector<std::size_t> cost((n + 1) * (m + 1));
    auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
    for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
    for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
        }
    }

    WerCounts counts;
    counts.n_ref = n;
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0) {
            const bool same = ref[i - 1] == hyp[j - 1];
            if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
                if (!same) ++counts.substitutions;
                --i;
                --j;
                continue;
            }
        }
        if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
            ++counts.deletions;
            --i;
        } else {
            ++counts.insertions;
            --j;
        }
    }
    return counts;
}

EvalReport aggregate_report(std::span<const UtteranceScore> scores, std::span<const UtteranceRecord> manifest) {
    std::unordered_map<std::string, Severity> severity_of;
    for (const auto& rec : manifest) severity_of.emplace(rec.id, rec.severity);

    EvalReport report;
    report.utterances.assign(scores.begin(), scores.end());
    std::map<Severity, GroupWer> groups;
    GroupWer overall{"overall"};
    for (const auto& s : scores) {
        auto it = severity_of.find(s.id);
        if (it == severity_of.end()) throw std::invalid_argument("aggregate_report: id \"" + s.id + "\" not in manifest");
        auto& g = groups[it->second];
        g.group = to_string(it->second);
        for (GroupWer* target : {&g, &overall}) {
            ++target->n_utterances;
            target->errors += s.counts.errors();
            target->n_ref += s.counts.n_ref;
        }
    }
    for (auto& [severity, g] : groups) {
        if (g.n_ref > 0) report.groups.push_back(g);
    }
    if (overall.n_ref > 0) report.overall = overall;
    return report;
}

namespace {

nlohmann::ordered_json group_json(const GroupWer& g) {
    return {{"group", g.group}, {"n_utterances", g.n_utterances}, {"errors", g.errors}, {"n_ref_words", g.n_ref},
            {"wer", g.wer()}};
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    auto& utts = j["utterances"] = nlohmann::ordered_json::array();
    for (const auto& u : report.utterances) {
        utts.push_back({{"id", u.id},
                        {"reference", u.reference},
                        {"hypothesis", u.hypothesis},
                        {"substitutions", u.counts.substitutions},
                        {"deletions", u.counts.deletions},
                        {"insertions", u.counts.insertions},
                        {"n_ref_words", u.counts.n_ref},
                        {"wer", u.counts.wer()}});
    }
    auto& groups = j["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : report.groups) groups.push_back(group_json(g));
    j["overall"] = report.overall ? group_json(*report.overall) : nlohmann::ordered_json(nullptr);
    return j.dump(2) + "\n";
}

std::string report_utterances_csv(const EvalReport& report) {
    detail::CsvWriter csv({"id", "substitutions", "deletions", "insertions", "n_ref_words", "wer", "reference",
                           "hypothesis"});
    for (const auto& u : report.utterances) {
        csv.row({u.id, std::to_string(u.counts.substitutions), std::to_string(u.counts.deletions),
                 std::to_string(u.counts.insertions), std::to_string(u.counts.n_ref), detail::format_real(u.counts.wer()),
                 u.reference, u.hypothesis});
    }
    return csv.str();
}

std::string report_groups_csv(const EvalReport& report) {
    detail::CsvWriter csv({"group", "n_utterances", "errors", "n_ref_words", "wer"});
    auto add = [&](const GroupWer& g) {
        csv.row({g.group, std::to_string(g.n_utterances), std::to_string(g.errors), std::to_string(g.n_ref),
                 detail::format_real(g.wer())});
    };
    for (const auto& g : report.groups) add(g);
    if (report.overall) add(*report.overall);
    return csv.str();
}

}  // namespace rnv
