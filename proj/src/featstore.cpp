#include "rnv/featstore.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "bytes.hpp"
#include "json.hpp"
#include "rnv/log.hpp"

namespace rnv {

using detail::ByteReader;
using detail::ByteWriter;

FeatureSequence::FeatureSequence(float frame_rate, FloatMatrix frames,
                                 std::optional<std::vector<FrameFlags>> flags)
    : frame_rate_(frame_rate), frames_(std::move(frames)), flags_(std::move(flags)) {}

FeatureSequence FeatureSequence::empty(float frame_rate, std::size_t dim) {
    return FeatureSequence(frame_rate, FloatMatrix(0, dim));
}

void FeatureSequence::validate() const {
    if (!(std::isfinite(frame_rate_) && frame_rate_ > 0.0F)) {
        throw std::invalid_argument("frame_rate must be positive and finite");
    }
    if (dim() == 0) throw std::invalid_argument("dim must be positive");
    if (flags_ && flags_->size() != n_frames()) {
        throw std::invalid_argument("flag count " + std::to_string(flags_->size()) +
                                    " does not match n_frames " + std::to_string(n_frames()));
    }
}

bool operator==(const FeatureSequence& a, const FeatureSequence& b) {
    if (std::bit_cast<std::uint32_t>(a.frame_rate_) != std::bit_cast<std::uint32_t>(b.frame_rate_)) {
        return false;
    }
    if (a.frames_.rows() != b.frames_.rows() || a.frames_.cols() != b.frames_.cols()) return false;
    const auto& da = a.frames_.data();
    const auto& db = b.frames_.data();
    if (!da.empty() && std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) != 0) return false;
    return a.flags_ == b.flags_;
}

RnvfError::RnvfError(Kind kind, std::uint64_t offset, const std::string& what)
    : std::runtime_error(what + " (offset " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

std::vector<std::uint8_t> encode_rnvf(const FeatureSequence& seq) {
    seq.validate();
    if (seq.n_frames() > UINT32_MAX || seq.dim() > UINT32_MAX) {
        throw std::invalid_argument("sequence too large for RNVF");
    }
    const std::size_t payload = seq.n_frames() * seq.dim() * 4;
    ByteWriter w(kRnvfHeaderBytes + payload + (seq.has_flags() ? seq.n_frames() : 0));
    w.bytes("RNVF", 4);
    w.u32(kRnvfVersion);
    w.f32(seq.frame_rate());
    w.u32(static_cast<std::uint32_t>(seq.dim()));
    w.u32(static_cast<std::uint32_t>(seq.n_frames()));
    w.u8(seq.has_flags() ? 1 : 0);
    w.f32s(seq.frames().data());
    if (seq.has_flags()) {
        for (const auto& f : *seq.flags()) {
            w.u8(f.to_byte());
        }
    }
    return w.take();
}

FeatureSequence decode_rnvf(std::span<const std::uint8_t> bytes) {
    using K = RnvfError::Kind;
    ByteReader r(bytes);
    if (!r.has(4)) throw RnvfError(K::Truncated, r.offset(), "RNVF: file shorter than magic");
    if (r.str(4) != "RNVF") throw RnvfError(K::BadMagic, 0, "RNVF: bad magic");
    if (!r.has(kRnvfHeaderBytes - 4)) throw RnvfError(K::Truncated, r.offset(), "RNVF: truncated header");
    const std::uint32_t version = r.u32();
    if (version != kRnvfVersion) {
        throw RnvfError(K::UnsupportedVersion, 4, "RNVF: unsupported version " + std::to_string(version));
    }
    const float frame_rate = r.f32();
    if (!(std::isfinite(frame_rate) && frame_rate > 0.0F)) {
        throw RnvfError(K::InvalidHeader, 8, "RNVF: frame_rate must be positive");
    }
    const std::uint32_t dim = r.u32();
    if (dim == 0) throw RnvfError(K::InvalidHeader, 12, "RNVF: dim must be positive");
    const std::uint32_t n_frames = r.u32();
    const std::uint8_t flags_present = r.u8();
    if (flags_present > 1) throw RnvfError(K::InvalidHeader, 20, "RNVF: flags_present must be 0 or 1");

    // Size check precedes allocation, so a corrupt header cannot force a huge buffer.
    const std::uint64_t payload = static_cast<std::uint64_t>(n_frames) * dim * 4;
    const std::uint64_t needed = payload + (flags_present ? n_frames : 0);
    if (r.remaining() < needed) {
        throw RnvfError(K::Truncated, bytes.size(),
                        "RNVF: truncated payload, expected " + std::to_string(needed) + " bytes after header, found " +
                            std::to_string(r.remaining()));
    }
    FloatMatrix frames(n_frames, dim);
    r.f32s(frames.data());
    std::optional<std::vector<FrameFlags>> flags;
    if (flags_present) {
        flags.emplace(n_frames);
        for (auto& f : *flags) f = FrameFlags::from_byte(r.u8());
    }
    if (r.remaining() != 0) {
        warn("RNVF: ignoring " + std::to_string(r.remaining()) + " trailing bytes");
    }
    return FeatureSequence(frame_rate, std::move(frames), std::move(flags));
}

void write_file_atomic(const fs::path& destination, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned> counter{0};
    if (destination.has_parent_path()) fs::create_directories(destination.parent_path());
    fs::path tmp = destination;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, destination, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot rename into place: " + destination.string());
    }
}

void write_text_atomic(const fs::path& destination, std::string_view text) {
    write_file_atomic(destination, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + source.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_rnvf(const FeatureSequence& seq, const fs::path& destination) {
    const auto bytes = encode_rnvf(seq);
    write_file_atomic(destination, bytes);
}

FeatureSequence read_rnvf(const fs::path& source) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(source);
    } catch (const std::runtime_error& e) {
        throw RnvfError(RnvfError::Kind::Io, 0, e.what());
    }
    return decode_rnvf(bytes);
}

std::string to_string(Severity s) {
    switch (s) {
        case Severity::Control: return "control";
        case Severity::Mild: return "mild";
        case Severity::Moderate: return "moderate";
        case Severity::ModSevere: return "mod-severe";
        case Severity::Severe: return "severe";
        case Severity::Unknown: break;
    }
    return "unknown";
}

Severity parse_severity(std::string_view text) {
    std::string s;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(static_cast<char>(std::tolower(c)));
    }
    for (Severity v : {Severity::Control, Severity::Mild, Severity::Moderate, Severity::ModSevere,
                       Severity::Severe, Severity::Unknown}) {
        if (s == to_string(v)) return v;
    }
    warn("unknown severity \"" + std::string(text) + "\" mapped to unknown");
    return Severity::Unknown;
}

ManifestError::ManifestError(std::size_t line, const std::string& what)
    : std::runtime_error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.is_absolute() || base.empty()) return p;
    return base / p;
}

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ManifestError(line, std::string("missing field \"") + key + "\"");
    if (!it->is_string()) throw ManifestError(line, std::string("field \"") + key + "\" must be a string");
    std::string v = it->get<std::string>();
    if (v.empty()) throw ManifestError(line, std::string("field \"") + key + "\" is empty");
    return v;
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ManifestError(line, std::string("field \"") + key + "\" must be a string");
    return it->get<std::string>();
}

}  // namespace

std::vector<UtteranceRecord> parse_manifest(std::string_view text, const fs::path& base_dir) {
    std::vector<UtteranceRecord> out;
    std::unordered_set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ManifestError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ManifestError(line_no, "expected a JSON object");

        UtteranceRecord rec;
        rec.id = required_string(obj, "id", line_no);
        rec.speaker = required_string(obj, "speaker", line_no);
        rec.feature_path = resolve(required_string(obj, "feature_path", line_no), base_dir);
        if (auto sev = optional_string(obj, "severity", line_no)) {
            rec.severity = parse_severity(*sev);
        }
        if (auto audio = optional_string(obj, "audio_path", line_no)) rec.audio_path = resolve(*audio, base_dir);
        rec.transcript = optional_string(obj, "transcript", line_no);

        if (!seen.insert(rec.id).second) throw ManifestError(line_no, "duplicate id \"" + rec.id + "\"");
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<UtteranceRecord> read_manifest(const fs::path& source) {
    std::ifstream in(source);
    if (!in) throw std::runtime_error("cannot open manifest: " + source.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), source.parent_path());
}

}  // namespace rnv
