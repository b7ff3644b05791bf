#include "rnv/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csv.hpp"
#include "json.hpp"
#include "rnv/log.hpp"
#include "rnv/signals.hpp"

namespace rnv {

namespace {

struct SetupName {
    ConversionSetup setup;
    const char* name;
};

constexpr SetupName kSetupNames[] = {
    {ConversionSetup::Original, "original"},
    {ConversionSetup::Vocoded, "vocoded"},
    {ConversionSetup::RhythmGlobal, "rhythm-global"},
    {ConversionSetup::RhythmFine, "rhythm-fine"},
    {ConversionSetup::VC, "vc"},
    {ConversionSetup::RhythmGlobalVC, "rhythm-global-vc"},
    {ConversionSetup::RhythmFineVC, "rhythm-fine-vc"},
};

}  // namespace

std::string to_string(ConversionSetup setup) {
    for (const auto& s : kSetupNames) {
        if (s.setup == setup) return s.name;
    }
    return "invalid";
}

ConversionSetup parse_setup(std::string_view name) {
    for (const auto& s : kSetupNames) {
        if (name == s.name) return s.setup;
    }
    throw ConfigError("unknown setup \"" + std::string(name) + "\"");
}

std::vector<std::string> setup_names() {
    std::vector<std::string> names;
    for (const auto& s : kSetupNames) names.emplace_back(s.name);
    return names;
}

bool uses_global_rhythm(ConversionSetup s) {
    return s == ConversionSetup::RhythmGlobal || s == ConversionSetup::RhythmGlobalVC;
}
bool uses_fine_rhythm(ConversionSetup s) { return s == ConversionSetup::RhythmFine || s == ConversionSetup::RhythmFineVC; }
bool uses_voice_conversion(ConversionSetup s) {
    return s == ConversionSetup::VC || s == ConversionSetup::RhythmGlobalVC || s == ConversionSetup::RhythmFineVC;
}

SourceRhythms::SourceRhythms(RhythmModel shared) : shared_(std::move(shared)) {}

SourceRhythms::SourceRhythms(std::vector<RhythmModel> per_speaker) {
    for (auto& m : per_speaker) {
        const std::string key = m.speaker;
        if (!per_speaker_.emplace(key, std::move(m)).second) {
            throw ConfigError("duplicate source rhythm model for speaker " + key);
        }
    }
}

SourceRhythms SourceRhythms::load(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        std::vector<RhythmModel> models;
        for (const auto& f : files) models.push_back(load_rhythm_model(f));
        if (models.empty()) throw ConfigError("no rhythm models in " + path.string());
        return SourceRhythms(std::move(models));
    }
    return SourceRhythms(load_rhythm_model(path));
}

const RhythmModel* SourceRhythms::find(const std::string& speaker) const {
    if (shared_) return &*shared_;
    auto it = per_speaker_.find(speaker);
    return it == per_speaker_.end() ? nullptr : &it->second;
}

std::vector<const RhythmModel*> SourceRhythms::all() const {
    std::vector<const RhythmModel*> out;
    if (shared_) out.push_back(&*shared_);
    for (const auto& [_, m] : per_speaker_) out.push_back(&m);
    return out;
}

void check_setup(const ConversionConfig& config, const ConversionModels& models) {
    const ConversionSetup s = config.setup;
    if (uses_global_rhythm(s) || uses_fine_rhythm(s)) {
        if (models.source_rhythm.empty()) throw ConfigError(to_string(s) + " needs a source rhythm model");
        if (!models.target_rhythm) throw ConfigError(to_string(s) + " needs a target rhythm model");
    }
    if (uses_global_rhythm(s)) {
        if (!(models.target_rhythm->rate_sps > 0.0)) {
            throw ConfigError("target rhythm model " + models.target_rhythm->speaker + " has zero speaking rate");
        }
        for (const RhythmModel* m : models.source_rhythm.all()) {
            if (!(m->rate_sps > 0.0)) throw ConfigError("source rhythm model " + m->speaker + " has zero speaking rate");
        }
    }
    if (uses_fine_rhythm(s)) {
        if (!models.segmenter) throw ConfigError(to_string(s) + " needs a segmenter model");
        if (!models.target_rhythm->has_fine()) {
            throw ConfigError("target rhythm model " + models.target_rhythm->speaker + " lacks duration models");
        }
        for (const RhythmModel* m : models.source_rhythm.all()) {
            if (!m->has_fine()) throw ConfigError("source rhythm model " + m->speaker + " lacks duration models");
        }
    }
    if (uses_voice_conversion(s)) {
        if (!models.pool || models.pool->size() == 0) throw ConfigError(to_string(s) + " needs a matching pool");
        if (config.k == 0) throw ConfigError("k must be at least 1");
    }
    if (!(config.penalty >= 0.0)) throw ConfigError("segment penalty must be non-negative");
}

FeatureSequence convert_utterance(const FeatureSequence& seq, const std::string& speaker,
                                  const ConversionConfig& config, const ConversionModels& models) {
    const ConversionSetup s = config.setup;
    FeatureSequence current = seq;
    if (uses_global_rhythm(s) || uses_fine_rhythm(s)) {
        const RhythmModel* src = models.source_rhythm.find(speaker);
        if (!src) throw std::invalid_argument("no source rhythm model for speaker " + speaker);
        if (uses_global_rhythm(s)) {
            current = convert_global(current, *src, *models.target_rhythm);
        } else {
            if (models.segmenter->dim() != seq.dim()) {
                throw std::invalid_argument("segmenter dim does not match features");
            }
            const Segmentation seg = segment_sequence(*models.segmenter, current, config.penalty);
            current = convert_fine(current, seg, *src, *models.target_rhythm);
        }
    }
    if (uses_voice_conversion(s)) current = convert_sequence(current, *models.pool, config.k);
    return current;
}

std::size_t RunResult::n_failed() const {
    return static_cast<std::size_t>(
        std::count_if(utterances.begin(), utterances.end(), [](const auto& u) { return u.error.has_value(); }));
}

std::vector<std::filesystem::path> RunResult::outputs() const {
    std::vector<std::filesystem::path> out;
    for (const auto& u : utterances) {
        if (!u.error) out.push_back(u.output);
    }
    return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

namespace {

std::string hash_text(const std::string& text) {
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::map<std::string, std::string> model_hashes(const ConversionConfig& config, const ConversionModels& models) {
    std::map<std::string, std::string> h;
    const ConversionSetup s = config.setup;
    if (uses_fine_rhythm(s) && models.segmenter) h["segmenter"] = sha256_hex(encode_segmenter(*models.segmenter));
    if (uses_global_rhythm(s) || uses_fine_rhythm(s)) {
        for (const RhythmModel* m : models.source_rhythm.all()) {
            h["source_rhythm:" + m->speaker] = hash_text(rhythm_model_to_json(*m));
        }
        h["target_rhythm"] = hash_text(rhythm_model_to_json(*models.target_rhythm));
    }
    if (uses_voice_conversion(s)) {
        const auto& data = models.pool->frames.data();
        h["pool"] = sha256_hex({reinterpret_cast<const std::uint8_t*>(data.data()), data.size() * sizeof(float)});
    }
    return h;
}

std::string run_manifest_json(const ConversionConfig& config, const RunResult& result) {
    nlohmann::ordered_json j;
    j["setup"] = to_string(config.setup);
    j["k"] = config.k;
    j["penalty"] = config.penalty;
    j["model_hashes"] = result.model_hashes;
    j["n_input"] = result.utterances.size();
    j["n_failed"] = result.n_failed();
    auto& utts = j["utterances"] = nlohmann::ordered_json::array();
    for (const auto& u : result.utterances) {
        nlohmann::ordered_json row{{"id", u.id}, {"input", u.input.string()}};
        if (u.error) {
            row["error"] = *u.error;
        } else {
            row["output"] = u.output.string();
            row["frames_in"] = u.frames_in;
            row["frames_out"] = u.frames_out;
        }
        utts.push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

}  // namespace

RunResult run_conversion(std::span<const UtteranceRecord> manifest, const ConversionModels& models,
                         const ConversionConfig& config, const std::filesystem::path& out_dir) {
    check_setup(config, models);
    const ConversionSetup s = config.setup;
    if (uses_global_rhythm(s) || uses_fine_rhythm(s)) {
        for (const auto& rec : manifest) {
            if (!models.source_rhythm.find(rec.speaker)) {
                throw ConfigError("no source rhythm model for speaker " + rec.speaker);
            }
        }
    }

    RunResult result;
    result.model_hashes = model_hashes(config, models);
    std::filesystem::create_directories(out_dir);
    for (const auto& rec : manifest) {
        UtteranceOutcome outcome;
        outcome.id = rec.id;
        outcome.input = rec.feature_path;
        outcome.output = out_dir / (rec.id + ".rnvf");
        try {
            if (s == ConversionSetup::Original || s == ConversionSetup::Vocoded) {
                // Identity in feature space; copy the bytes after validating them.
                const auto bytes = read_file_bytes(rec.feature_path);
                const FeatureSequence seq = decode_rnvf(bytes);
                write_file_atomic(outcome.output, bytes);
                outcome.frames_in = outcome.frames_out = seq.n_frames();
            } else {
                const FeatureSequence seq = read_rnvf(rec.feature_path);
                const FeatureSequence converted = convert_utterance(seq, rec.speaker, config, models);
                write_rnvf(converted, outcome.output);
                outcome.frames_in = seq.n_frames();
                outcome.frames_out = converted.n_frames();
            }
        } catch (const std::exception& e) {
            outcome.error = e.what();
            warn("utterance " + rec.id + " skipped: " + e.what());
        }
        result.utterances.push_back(std::move(outcome));
    }
    write_text_atomic(out_dir / kRunManifestName, run_manifest_json(config, result));
    return result;
}

std::optional<std::vector<FrameFlags>> training_flags(const UtteranceRecord& record, const FeatureSequence& seq) {
    if (seq.has_flags()) return seq.flags();
    if (!record.audio_path) return std::nullopt;
    const Waveform w = read_wav(*record.audio_path);
    auto flags = compute_frame_flags(w, seq.frame_rate());
    const auto n = seq.n_frames();
    const auto diff = flags.size() > n ? flags.size() - n : n - flags.size();
    if (diff > 2) {
        warn("utterance " + record.id + ": " + std::to_string(flags.size()) + " audio frames vs " + std::to_string(n) +
             " feature frames; flags not usable");
        return std::nullopt;
    }
    if (flags.empty()) return std::nullopt;
    flags.resize(n, flags.back());
    return flags;
}

std::vector<SpeakerRhythm> analyze_rhythm(std::span<const UtteranceRecord> manifest, const SegmenterModel& model,
                                          double penalty) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<Segmentation>> segs;
    std::map<std::string, SpeakerRhythm> rows;
    for (const auto& rec : manifest) {
        FeatureSequence seq;
        try {
            seq = read_rnvf(rec.feature_path);
        } catch (const std::exception& e) {
            warn("utterance " + rec.id + " skipped: " + e.what());
            continue;
        }
        if (seq.n_frames() == 0) {
            warn("utterance " + rec.id + " has no frames; skipped");
            continue;
        }
        auto [it, inserted] = rows.try_emplace(rec.speaker);
        if (inserted) {
            order.push_back(rec.speaker);
            it->second.speaker = rec.speaker;
            it->second.severity = rec.severity;
        }
        it->second.n_utterances += 1;
        it->second.total_seconds += seq.duration_seconds();
        segs[rec.speaker].push_back(segment_sequence(model, seq, penalty));
    }

    std::vector<SpeakerRhythm> out;
    for (const auto& speaker : order) {
        SpeakerRhythm row = rows[speaker];
        const RhythmModel rm = build_rhythm_model(speaker, segs[speaker], model.frame_rate);
        row.rate_sps = rm.rate_sps;
        row.fine = rm.fine;
        const RhythmStats stats = collect_rhythm_stats(segs[speaker], model.frame_rate);
        for (SpeechType t : kAllSpeechTypes) row.segment_counts[index_of(t)] = stats.segment_count(t);
        out.push_back(std::move(row));
    }
    return out;
}

std::string analysis_to_json(std::span<const SpeakerRhythm> rows) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row{{"speaker", r.speaker},
                                   {"severity", to_string(r.severity)},
                                   {"n_utterances", r.n_utterances},
                                   {"total_seconds", r.total_seconds},
                                   {"rate_sps", r.rate_sps}};
        nlohmann::ordered_json counts;
        nlohmann::ordered_json fine;
        for (SpeechType t : kAllSpeechTypes) {
            counts[to_string(t)] = r.segment_counts[index_of(t)];
            const auto& p = r.fine[index_of(t)];
            fine[to_string(t)] = p ? nlohmann::ordered_json{{"shape", p->shape}, {"scale", p->scale}, {"n", p->n_samples}}
                                   : nlohmann::ordered_json(nullptr);
        }
        row["segment_counts"] = counts;
        row["fine"] = fine;
        j.push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

std::string analysis_to_csv(std::span<const SpeakerRhythm> rows) {
    detail::CsvWriter csv({"speaker", "severity", "n_utterances", "total_seconds", "rate_sps", "silence_count",
                           "sonorant_count", "obstruent_count", "silence_shape", "silence_scale", "sonorant_shape",
                           "sonorant_scale", "obstruent_shape", "obstruent_scale"});
    for (const auto& r : rows) {
        std::vector<std::string> cells{r.speaker, to_string(r.severity), std::to_string(r.n_utterances),
                                       detail::format_real(r.total_seconds), detail::format_real(r.rate_sps)};
        for (SpeechType t : kAllSpeechTypes) cells.push_back(std::to_string(r.segment_counts[index_of(t)]));
        for (SpeechType t : kAllSpeechTypes) {
            const auto& p = r.fine[index_of(t)];
            cells.push_back(p ? detail::format_real(p->shape) : "");
            cells.push_back(p ? detail::format_real(p->scale) : "");
        }
        csv.row(cells);
    }
    return csv.str();
}

}  // namespace rnv
