#include "rnv/rhythm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rnv/log.hpp"
#include "rnv/special.hpp"

namespace rnv {

GammaParams fit_gamma(std::span<const double> durations) {
    if (durations.size() < 2) {
        throw std::invalid_argument("fit_gamma: need at least 2 durations, got " + std::to_string(durations.size()));
    }
    double sum = 0.0;
    double sum_log = 0.0;
    for (double d : durations) {
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw std::invalid_argument("fit_gamma: durations must be positive and finite");
        }
        sum += d;
        sum_log += std::log(d);
    }
    if (std::all_of(durations.begin(), durations.end(), [&](double d) { return d == durations.front(); })) {
        throw std::invalid_argument("fit_gamma: zero variance in durations");
    }
    const auto n = static_cast<double>(durations.size());
    const double mean = sum / n;
    const double s = std::log(mean) - sum_log / n;
    if (!(s > 0.0)) throw std::invalid_argument("fit_gamma: zero variance in durations");

    // Closed-form starting point, then Newton on ln k - psi(k) = s.
    double shape = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
    for (int iter = 0; iter < 100; ++iter) {
        const double f = std::log(shape) - special::digamma(shape) - s;
        const double df = 1.0 / shape - special::trigamma(shape);
        double next = shape - f / df;
        if (!(next > 0.0)) next = shape / 2.0;
        const double update = std::fabs(next - shape);
        shape = next;
        if (update < 1e-10) break;
    }
    return {shape, mean / shape, durations.size()};
}

namespace {

void check_params(const GammaParams& p) {
    if (!(p.shape > 0.0 && p.scale > 0.0)) throw std::invalid_argument("gamma: shape and scale must be positive");
}

}  // namespace

double gamma_pdf(const GammaParams& p, double x) {
    check_params(p);
    if (x < 0.0) return 0.0;
    if (x == 0.0) {
        if (p.shape < 1.0) return std::numeric_limits<double>::infinity();
        return p.shape == 1.0 ? 1.0 / p.scale : 0.0;
    }
    const double z = x / p.scale;
    return std::exp((p.shape - 1.0) * std::log(z) - z - std::lgamma(p.shape)) / p.scale;
}

double gamma_cdf(const GammaParams& p, double x) {
    check_params(p);
    if (!(x >= 0.0)) throw std::domain_error("gamma_cdf: x must be non-negative");
    return special::gamma_p(p.shape, x / p.scale);
}

double gamma_ppf(const GammaParams& p, double u) {
    check_params(p);
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("gamma_ppf: probability must lie in (0, 1)");

    double lo = 0.0;
    double hi = std::max(p.mean(), p.scale);
    while (gamma_cdf(p, hi) < u) {
        lo = hi;
        hi *= 2.0;
    }
    double x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 400; ++iter) {
        const double f = gamma_cdf(p, x) - u;
        if (std::fabs(f) <= 1e-13) break;
        if (f < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        const double slope = gamma_pdf(p, x);
        double next = (slope > 0.0 && std::isfinite(slope)) ? x - f / slope : lo - 1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    return x;
}

FloatMatrix time_stretch(const FloatMatrix& frames, std::size_t frames_out) {
    const std::size_t frames_in = frames.rows();
    if (frames_in == 0) throw std::invalid_argument("time_stretch: no input frames");
    if (frames_out == 0) throw std::invalid_argument("time_stretch: output length must be at least 1");
    if (frames_out == frames_in) return frames;

    const std::size_t dim = frames.cols();
    FloatMatrix out(frames_out, dim);
    if (frames_out == 1) {
        std::copy(frames.row(0).begin(), frames.row(0).end(), out.row(0).begin());
        return out;
    }
    for (std::size_t i = 0; i < frames_out; ++i) {
        // Integer numerator keeps both endpoints exact.
        const double pos = static_cast<double>(i * (frames_in - 1)) / static_cast<double>(frames_out - 1);
        const auto left = std::min(static_cast<std::size_t>(pos), frames_in - 1);
        const std::size_t right = std::min(left + 1, frames_in - 1);
        const double frac = pos - static_cast<double>(left);
        const auto a = frames.row(left);
        const auto b = frames.row(right);
        auto o = out.row(i);
        if (frac == 0.0) {
            std::copy(a.begin(), a.end(), o.begin());
            continue;
        }
        for (std::size_t d = 0; d < dim; ++d) {
            o[d] = static_cast<float>(a[d] + frac * (static_cast<double>(b[d]) - a[d]));
        }
    }
    return out;
}

namespace {

std::size_t total_frames(const Segmentation& seg) { return seg.empty() ? 0 : seg.back().end; }

std::vector<FrameFlags> resample_flags(std::span<const FrameFlags> flags, std::size_t frames_out) {
    std::vector<FrameFlags> out(frames_out);
    const std::size_t frames_in = flags.size();
    for (std::size_t i = 0; i < frames_out; ++i) {
        const std::size_t src =
            frames_out == 1 ? 0
                            : static_cast<std::size_t>(std::llround(static_cast<double>(i * (frames_in - 1)) /
                                                                    static_cast<double>(frames_out - 1)));
        out[i] = flags[std::min(src, frames_in - 1)];
    }
    return out;
}

}  // namespace

RhythmStats collect_rhythm_stats(std::span<const Segmentation> segmentations, double frame_rate) {
    if (segmentations.empty()) throw std::invalid_argument("speaking rate: no segmentations");
    if (!(frame_rate > 0.0)) throw std::invalid_argument("speaking rate: frame_rate must be positive");
    RhythmStats stats;
    std::size_t frames = 0;
    for (const auto& seg : segmentations) {
        frames += total_frames(seg);
        for (const auto& s : seg) {
            stats.durations[index_of(s.type)].push_back(static_cast<double>(s.length()) / frame_rate);
        }
    }
    if (frames == 0) throw std::invalid_argument("speaking rate: total duration is zero");
    const double seconds = static_cast<double>(frames) / frame_rate;
    stats.rate_sps = static_cast<double>(stats.segment_count(SpeechType::Sonorant)) / seconds;
    return stats;
}

double estimate_speaking_rate(std::span<const Segmentation> segmentations, double frame_rate) {
    const RhythmStats stats = collect_rhythm_stats(segmentations, frame_rate);
    if (stats.rate_sps == 0.0) warn("no sonorant segments found; speaking rate is 0 and blocks global conversion");
    return stats.rate_sps;
}

RhythmModel build_rhythm_model(const std::string& speaker, std::span<const Segmentation> segmentations,
                               float frame_rate) {
    RhythmModel model;
    model.speaker = speaker;
    model.frame_rate = frame_rate;
    const RhythmStats stats = collect_rhythm_stats(segmentations, frame_rate);
    model.rate_sps = stats.rate_sps;
    if (model.rate_sps == 0.0) warn("speaker " + speaker + ": no sonorant segments; speaking rate is 0");
    for (SpeechType t : kAllSpeechTypes) {
        const auto& d = stats.durations[index_of(t)];
        if (d.size() < 2) {
            warn("speaker " + speaker + ": " + std::to_string(d.size()) + " " + to_string(t) +
                 " segment(s); duration model left empty");
            continue;
        }
        try {
            model.fine[index_of(t)] = fit_gamma(d);
        } catch (const std::invalid_argument& e) {
            warn("speaker " + speaker + ": " + to_string(t) + " duration model left empty (" + e.what() + ")");
        }
    }
    return model;
}

std::string rhythm_model_to_json(const RhythmModel& model) {
    nlohmann::ordered_json j;
    j["speaker"] = model.speaker;
    j["frame_rate"] = model.frame_rate;
    j["rate_sps"] = model.rate_sps;
    bool any = false;
    nlohmann::ordered_json fine = nlohmann::ordered_json::object();
    for (SpeechType t : kAllSpeechTypes) {
        const auto& p = model.fine_for(t);
        if (p) {
            fine[to_string(t)] = {{"shape", p->shape}, {"scale", p->scale}, {"n", p->n_samples}};
            any = true;
        } else {
            fine[to_string(t)] = nullptr;
        }
    }
    if (any) j["fine"] = fine;
    return j.dump(2) + "\n";
}

RhythmModel rhythm_model_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    RhythmModel model;
    try {
        model.speaker = j.at("speaker").get<std::string>();
        model.frame_rate = j.at("frame_rate").get<float>();
        model.rate_sps = j.at("rate_sps").get<double>();
        if (auto it = j.find("fine"); it != j.end() && !it->is_null()) {
            for (SpeechType t : kAllSpeechTypes) {
                auto e = it->find(to_string(t));
                if (e == it->end() || e->is_null()) continue;
                GammaParams p{e->at("shape").get<double>(), e->at("scale").get<double>(), e->value("n", std::size_t{0})};
                if (!(p.shape > 0.0 && p.scale > 0.0)) {
                    throw std::invalid_argument(to_string(t) + " shape and scale must be positive");
                }
                model.fine[index_of(t)] = p;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("rhythm model: ") + e.what());
    }
    if (!(model.frame_rate > 0.0F)) throw std::invalid_argument("rhythm model: frame_rate must be positive");
    if (!(model.rate_sps >= 0.0)) throw std::invalid_argument("rhythm model: rate_sps must be non-negative");
    return model;
}

void save_rhythm_model(const RhythmModel& model, const std::filesystem::path& destination) {
    write_text_atomic(destination, rhythm_model_to_json(model));
}

RhythmModel load_rhythm_model(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) throw std::runtime_error("cannot open rhythm model: " + source.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return rhythm_model_from_json(buf.str());
}

std::size_t global_output_length(std::size_t frames_in, double src_rate, double tgt_rate) {
    if (!(src_rate > 0.0) || !(tgt_rate > 0.0)) {
        throw std::invalid_argument("global conversion needs positive speaking rates on both sides");
    }
    const double scaled = static_cast<double>(frames_in) * src_rate / tgt_rate;
    return static_cast<std::size_t>(std::max<long long>(1, std::llround(scaled)));
}

FeatureSequence convert_global(const FeatureSequence& seq, const RhythmModel& src, const RhythmModel& tgt) {
    const std::size_t frames_out = global_output_length(seq.n_frames(), src.rate_sps, tgt.rate_sps);
    if (seq.n_frames() == 0) throw std::invalid_argument("convert_global: empty sequence");
    if (frames_out == seq.n_frames()) return seq;
    std::optional<std::vector<FrameFlags>> flags;
    if (seq.has_flags()) flags = resample_flags(*seq.flags(), frames_out);
    return FeatureSequence(seq.frame_rate(), time_stretch(seq.frames(), frames_out), std::move(flags));
}

StretchPlan plan_fine(const Segmentation& segmentation, float frame_rate, const RhythmModel& src,
                      const RhythmModel& tgt) {
    StretchPlan plan;
    plan.reserve(segmentation.size());
    for (const auto& seg : segmentation) {
        const auto& from = src.fine_for(seg.type);
        const auto& to = tgt.fine_for(seg.type);
        if (!from || !to) {
            throw std::invalid_argument("fine conversion: no " + to_string(seg.type) + " duration model for speaker " +
                                        (!from ? src.speaker : tgt.speaker));
        }
        const double seconds = static_cast<double>(seg.length()) / frame_rate;
        const double rank = std::clamp(gamma_cdf(*from, seconds), kRankClampLow, kRankClampHigh);
        const double target_seconds = gamma_ppf(*to, rank);
        const auto frames = std::max<long long>(1, std::llround(target_seconds * frame_rate));
        plan.push_back({seg, static_cast<std::size_t>(frames)});
    }
    return plan;
}

FeatureSequence apply_stretch_plan(const FeatureSequence& seq, const StretchPlan& plan) {
    std::size_t cursor = 0;
    std::size_t total = 0;
    for (const auto& step : plan) {
        if (step.source.start != cursor || step.source.end <= step.source.start) {
            throw std::invalid_argument("stretch plan does not tile the sequence at frame " + std::to_string(cursor));
        }
        if (step.target_frames == 0) throw std::invalid_argument("stretch plan: zero-length target");
        cursor = step.source.end;
        total += step.target_frames;
    }
    if (cursor != seq.n_frames()) throw std::invalid_argument("stretch plan does not cover the sequence");

    const std::size_t dim = seq.dim();
    std::vector<float> data;
    data.reserve(total * dim);
    std::optional<std::vector<FrameFlags>> flags;
    if (seq.has_flags()) flags.emplace().reserve(total);
    for (const auto& step : plan) {
        const auto& src = seq.frames().data();
        FloatMatrix piece(step.source.length(), dim,
                          std::vector<float>(src.begin() + static_cast<std::ptrdiff_t>(step.source.start * dim),
                                             src.begin() + static_cast<std::ptrdiff_t>(step.source.end * dim)));
        const FloatMatrix stretched = time_stretch(piece, step.target_frames);
        data.insert(data.end(), stretched.data().begin(), stretched.data().end());
        if (flags) {
            const std::span<const FrameFlags> all(*seq.flags());
            const auto part = resample_flags(all.subspan(step.source.start, step.source.length()), step.target_frames);
            flags->insert(flags->end(), part.begin(), part.end());
        }
    }
    return FeatureSequence(seq.frame_rate(), FloatMatrix(total, dim, std::move(data)), std::move(flags));
}

FeatureSequence convert_fine(const FeatureSequence& seq, const Segmentation& segmentation, const RhythmModel& src,
                             const RhythmModel& tgt) {
    validate_segmentation(segmentation, seq.n_frames());
    return apply_stretch_plan(seq, plan_fine(segmentation, seq.frame_rate(), src, tgt));
}

}  // namespace rnv
