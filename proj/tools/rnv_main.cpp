// rnv: command-line front end for rhythm and voice conversion in feature space.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rnv/featstore.hpp"
#include "rnv/knnvc.hpp"
#include "rnv/log.hpp"
#include "rnv/pipeline.hpp"
#include "rnv/rhythm.hpp"
#include "rnv/segmenter.hpp"
#include "rnv/wer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

std::vector<rnv::UtteranceRecord> load_manifest_or_throw(const fs::path& path) {
    try {
        return rnv::read_manifest(path);
    } catch (const std::exception& e) {
        throw rnv::ConfigError(e.what());
    }
}

// Reads "id" -> field from a JSONL file.
std::map<std::string, std::string> read_jsonl_field(const fs::path& path, std::initializer_list<const char*> keys) {
    std::ifstream in(path);
    if (!in) throw rnv::ConfigError("cannot open " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw rnv::ConfigError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("id") || !j["id"].is_string()) {
            throw rnv::ConfigError(path.string() + " line " + std::to_string(line_no) + ": missing id");
        }
        std::string value;
        for (const char* key : keys) {
            if (j.contains(key) && j[key].is_string()) {
                value = j[key].get<std::string>();
                break;
            }
        }
        out[j["id"].get<std::string>()] = value;
    }
    return out;
}

struct TrainArgs {
    fs::path manifest;
    std::size_t k = 100;
    std::uint64_t seed = 0;
    fs::path out;
};

int run_train(const TrainArgs& a) {
    const auto records = load_manifest_or_throw(a.manifest);
    std::vector<rnv::FeatureSequence> train;
    std::size_t skipped = 0;
    for (const auto& rec : records) {
        try {
            rnv::FeatureSequence seq = rnv::read_rnvf(rec.feature_path);
            auto flags = rnv::training_flags(rec, seq);
            if (!flags) {
                rnv::warn("utterance " + rec.id + " has no flags and no usable audio; skipped");
                ++skipped;
                continue;
            }
            train.emplace_back(seq.frame_rate(), seq.frames(), std::move(flags));
        } catch (const std::exception& e) {
            rnv::warn("utterance " + rec.id + " skipped: " + e.what());
            ++skipped;
        }
    }
    if (train.empty()) throw rnv::ConfigError("no usable training utterances");
    rnv::SegmenterTrainingOptions opts;
    opts.k = a.k;
    opts.seed = a.seed;
    rnv::SegmenterModel model;
    try {
        model = rnv::train_segmenter(train, opts);
    } catch (const std::exception& e) {
        throw rnv::ConfigError(std::string("training failed: ") + e.what());
    }
    rnv::save_segmenter(model, a.out);

    nlohmann::ordered_json info;
    info["k"] = a.k;
    info["seed"] = a.seed;
    info["n_utterances"] = train.size();
    info["n_skipped"] = skipped;
    info["sigma2"] = model.sigma2;
    info["frame_rate"] = model.frame_rate;
    fs::path info_path = a.out;
    info_path += ".info.json";
    rnv::write_text_atomic(info_path, info.dump(2) + "\n");
    std::cout << "segmenter: " << a.out.string() << " (k=" << a.k << ", " << train.size() << " utterances)\n";
    return skipped > 0 ? kExitPartial : kExitOk;
}

rnv::SegmenterModel load_segmenter_or_throw(const fs::path& path) {
    try {
        return rnv::load_segmenter(path);
    } catch (const std::exception& e) {
        throw rnv::ConfigError(e.what());
    }
}

// Segments every readable utterance; failures are warned and counted.
std::vector<std::pair<const rnv::UtteranceRecord*, rnv::Segmentation>> segment_all(
    const std::vector<rnv::UtteranceRecord>& records, const rnv::SegmenterModel& model, double gamma,
    std::size_t& failures) {
    std::vector<std::pair<const rnv::UtteranceRecord*, rnv::Segmentation>> out;
    for (const auto& rec : records) {
        try {
            const auto seq = rnv::read_rnvf(rec.feature_path);
            if (seq.frame_rate() != model.frame_rate) {
                throw std::invalid_argument("frame rate differs from the segmenter's");
            }
            out.emplace_back(&rec, rnv::segment_sequence(model, seq, gamma));
        } catch (const std::exception& e) {
            rnv::warn("utterance " + rec.id + " skipped: " + e.what());
            ++failures;
        }
    }
    return out;
}

struct RhythmArgs {
    fs::path manifest;
    fs::path segmenter;
    std::string speaker;
    double gamma = rnv::kDefaultSegmentPenalty;
    fs::path out;
};

int run_build_rhythm(const RhythmArgs& a) {
    auto records = load_manifest_or_throw(a.manifest);
    std::string speaker = a.speaker;
    if (speaker.empty()) {
        if (records.empty()) throw rnv::ConfigError("empty manifest");
        speaker = records.front().speaker;
        for (const auto& r : records) {
            if (r.speaker != speaker) throw rnv::ConfigError("manifest has several speakers; pass --speaker");
        }
    }
    std::erase_if(records, [&](const auto& r) { return r.speaker != speaker; });
    if (records.empty()) throw rnv::ConfigError("no utterances for speaker " + speaker);
    const auto model = load_segmenter_or_throw(a.segmenter);
    std::size_t failures = 0;
    std::vector<rnv::Segmentation> segs;
    for (auto& [rec, seg] : segment_all(records, model, a.gamma, failures)) {
        if (!seg.empty()) segs.push_back(std::move(seg));
    }
    if (segs.empty()) throw rnv::ConfigError("no utterance could be segmented");
    const auto rhythm = rnv::build_rhythm_model(speaker, segs, model.frame_rate);
    rnv::save_rhythm_model(rhythm, a.out);
    std::cout << "rhythm model: " << a.out.string() << " (" << speaker << ", " << rhythm.rate_sps << " sonorants/s)\n";
    return failures > 0 ? kExitPartial : kExitOk;
}

struct SegmentArgs {
    fs::path manifest;
    fs::path segmenter;
    double gamma = rnv::kDefaultSegmentPenalty;
    fs::path out;
};

int run_segment(const SegmentArgs& a) {
    const auto records = load_manifest_or_throw(a.manifest);
    const auto model = load_segmenter_or_throw(a.segmenter);
    std::size_t failures = 0;
    std::ostringstream jsonl;
    for (const auto& [rec, seg] : segment_all(records, model, a.gamma, failures)) {
        nlohmann::ordered_json row{{"id", rec->id}, {"frame_rate", model.frame_rate}};
        auto& list = row["segments"] = nlohmann::ordered_json::array();
        for (const auto& s : seg) list.push_back({rnv::to_string(s.type), s.start, s.end});
        jsonl << row.dump() << '\n';
    }
    rnv::write_text_atomic(a.out, jsonl.str());
    return failures > 0 ? kExitPartial : kExitOk;
}

struct ConvertArgs {
    fs::path manifest;
    std::string setup;
    fs::path segmenter;
    fs::path src_rhythm;
    fs::path tgt_rhythm;
    fs::path pool_manifest;
    std::size_t k = rnv::kDefaultNeighbours;
    double gamma = rnv::kDefaultSegmentPenalty;
    fs::path out_dir;
};

int run_convert(const ConvertArgs& a) {
    rnv::ConversionConfig config;
    config.setup = rnv::parse_setup(a.setup);
    config.k = a.k;
    config.penalty = a.gamma;
    const auto records = load_manifest_or_throw(a.manifest);

    rnv::ConversionModels models;
    try {
        if (!a.segmenter.empty()) models.segmenter = rnv::load_segmenter(a.segmenter);
        if (!a.src_rhythm.empty()) models.source_rhythm = rnv::SourceRhythms::load(a.src_rhythm);
        if (!a.tgt_rhythm.empty()) models.target_rhythm = rnv::load_rhythm_model(a.tgt_rhythm);
        if (rnv::uses_voice_conversion(config.setup)) {
            if (a.pool_manifest.empty()) throw rnv::ConfigError(a.setup + " needs --pool-manifest");
            std::vector<rnv::FeatureSequence> bank;
            for (const auto& rec : rnv::read_manifest(a.pool_manifest)) bank.push_back(rnv::read_rnvf(rec.feature_path));
            models.pool = rnv::build_pool(bank);
        }
    } catch (const rnv::ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw rnv::ConfigError(e.what());
    }

    const auto result = rnv::run_conversion(records, models, config, a.out_dir);
    std::cout << a.setup << ": " << result.outputs().size() << " converted, " << result.n_failed() << " skipped\n";
    return result.n_failed() > 0 ? kExitPartial : kExitOk;
}

struct AnalyzeArgs {
    fs::path manifest;
    fs::path segmenter;
    double gamma = rnv::kDefaultSegmentPenalty;
    fs::path out;
};

int run_analyze(const AnalyzeArgs& a) {
    const auto records = load_manifest_or_throw(a.manifest);
    const auto model = load_segmenter_or_throw(a.segmenter);
    const auto rows = rnv::analyze_rhythm(records, model, a.gamma);
    fs::create_directories(a.out);
    rnv::write_text_atomic(a.out / "rhythm_analysis.json", rnv::analysis_to_json(rows));
    rnv::write_text_atomic(a.out / "rhythm_analysis.csv", rnv::analysis_to_csv(rows));
    std::size_t analysed = 0;
    for (const auto& r : rows) analysed += r.n_utterances;
    return analysed < records.size() ? kExitPartial : kExitOk;
}

struct WerArgs {
    fs::path refs;
    fs::path hyps;
    fs::path manifest;
    fs::path out;
};

int run_wer(const WerArgs& a) {
    const auto records = load_manifest_or_throw(a.manifest);
    std::map<std::string, std::string> refs;
    if (!a.refs.empty()) {
        refs = read_jsonl_field(a.refs, {"reference", "transcript", "text"});
    } else {
        for (const auto& r : records) {
            if (r.transcript) refs[r.id] = *r.transcript;
        }
    }
    const auto hyps = read_jsonl_field(a.hyps, {"hypothesis", "text"});

    std::vector<rnv::UtteranceScore> scores;
    bool partial = false;
    for (const auto& rec : records) {
        auto ref = refs.find(rec.id);
        if (ref == refs.end()) continue;
        auto hyp = hyps.find(rec.id);
        if (hyp == hyps.end()) {
            rnv::warn("no hypothesis for " + rec.id);
            partial = true;
            continue;
        }
        scores.push_back({rec.id, ref->second, hyp->second, rnv::score_wer(ref->second, hyp->second)});
    }
    for (const auto& [id, _] : hyps) {
        if (!refs.contains(id)) {
            rnv::warn("hypothesis " + id + " has no reference; ignored");
            partial = true;
        }
    }
    rnv::EvalReport report;
    try {
        report = rnv::aggregate_report(scores, records);
    } catch (const std::exception& e) {
        throw rnv::ConfigError(e.what());
    }
    fs::create_directories(a.out);
    rnv::write_text_atomic(a.out / "wer_report.json", rnv::report_to_json(report));
    rnv::write_text_atomic(a.out / "wer_utterances.csv", rnv::report_utterances_csv(report));
    rnv::write_text_atomic(a.out / "wer_groups.csv", rnv::report_groups_csv(report));
    for (const auto& g : report.groups) std::cout << g.group << "\t" << g.wer() << "\n";
    if (report.overall) std::cout << "overall\t" << report.overall->wer() << "\n";
    return partial ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised rhythm and voice conversion in self-supervised feature space"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train-segmenter", "Fit the speech-type segmenter on target-speaker features");
    train_cmd->add_option("--manifest", train.manifest, "Utterance manifest (JSONL)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--k", train.k, "Number of k-means centroids")->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "k-means seed")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Output segmenter model (RNVS)")->required();

    RhythmArgs rhythm;
    auto* rhythm_cmd = app.add_subcommand("build-rhythm", "Estimate a speaker's global and fine-grained rhythm model");
    rhythm_cmd->add_option("--manifest", rhythm.manifest)->required()->check(CLI::ExistingFile);
    rhythm_cmd->add_option("--segmenter", rhythm.segmenter)->required()->check(CLI::ExistingFile);
    rhythm_cmd->add_option("--speaker", rhythm.speaker, "Speaker to model (default: the manifest's only speaker)");
    rhythm_cmd->add_option("--gamma", rhythm.gamma, "Segment penalty")->capture_default_str();
    rhythm_cmd->add_option("--out", rhythm.out, "Output rhythm model (JSON)")->required();

    SegmentArgs segment;
    auto* segment_cmd = app.add_subcommand("segment", "Segment utterances into silence/sonorant/obstruent runs");
    segment_cmd->add_option("--manifest", segment.manifest)->required()->check(CLI::ExistingFile);
    segment_cmd->add_option("--segmenter", segment.segmenter)->required()->check(CLI::ExistingFile);
    segment_cmd->add_option("--gamma", segment.gamma, "Segment penalty")->capture_default_str();
    segment_cmd->add_option("--out", segment.out, "Output JSONL")->required();

    ConvertArgs convert;
    auto* convert_cmd = app.add_subcommand("convert", "Convert utterances under one experimental setup");
    convert_cmd->add_option("--manifest", convert.manifest)->required()->check(CLI::ExistingFile);
    convert_cmd->add_option("--setup", convert.setup)->required()->check(CLI::IsMember(rnv::setup_names()));
    convert_cmd->add_option("--segmenter", convert.segmenter)->check(CLI::ExistingFile);
    convert_cmd->add_option("--src-rhythm", convert.src_rhythm, "Rhythm model file, or directory of per-speaker models")
        ->check(CLI::ExistingPath);
    convert_cmd->add_option("--tgt-rhythm", convert.tgt_rhythm)->check(CLI::ExistingFile);
    convert_cmd->add_option("--pool-manifest", convert.pool_manifest, "Target-speaker manifest for kNN matching")
        ->check(CLI::ExistingFile);
    convert_cmd->add_option("--k", convert.k, "Neighbours per frame")->capture_default_str();
    convert_cmd->add_option("--gamma", convert.gamma, "Segment penalty")->capture_default_str();
    convert_cmd->add_option("--out-dir", convert.out_dir)->required();

    AnalyzeArgs analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "Per-speaker rhythm analysis (JSON and CSV)");
    analyze_cmd->add_option("--manifest", analyze.manifest)->required()->check(CLI::ExistingFile);
    analyze_cmd->add_option("--segmenter", analyze.segmenter)->required()->check(CLI::ExistingFile);
    analyze_cmd->add_option("--gamma", analyze.gamma, "Segment penalty")->capture_default_str();
    analyze_cmd->add_option("--out", analyze.out, "Output directory")->required();

    WerArgs wer;
    auto* wer_cmd = app.add_subcommand("wer", "Score hypotheses and aggregate WER by severity");
    wer_cmd->add_option("--refs", wer.refs, "JSONL of {id, reference}; defaults to manifest transcripts")
        ->check(CLI::ExistingFile);
    wer_cmd->add_option("--hyps", wer.hyps, "JSONL of {id, hypothesis}")->required()->check(CLI::ExistingFile);
    wer_cmd->add_option("--manifest", wer.manifest)->required()->check(CLI::ExistingFile);
    wer_cmd->add_option("--out", wer.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train_cmd) return run_train(train);
        if (*rhythm_cmd) return run_build_rhythm(rhythm);
        if (*segment_cmd) return run_segment(segment);
        if (*convert_cmd) return run_convert(convert);
        if (*analyze_cmd) return run_analyze(analyze);
        if (*wer_cmd) return run_wer(wer);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
