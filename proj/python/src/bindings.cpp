#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rnv/featstore.hpp"
#include "rnv/knnvc.hpp"
#include "rnv/rhythm.hpp"
#include "rnv/segmenter.hpp"
#include "rnv/wer.hpp"

namespace py = pybind11;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

rnv::FloatMatrix to_matrix(const FloatArray& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D (frames x dim) array");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return rnv::FloatMatrix(rows, cols, std::vector<float>(a.data(), a.data() + rows * cols));
}

py::array_t<float> to_array(const rnv::FloatMatrix& m) {
    const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())};
    py::array_t<float> out(shape);
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

std::optional<std::vector<rnv::FrameFlags>> to_flags(const std::optional<py::array_t<std::uint8_t>>& bytes) {
    if (!bytes) return std::nullopt;
    std::vector<rnv::FrameFlags> flags;
    const auto view = bytes->unchecked<1>();
    for (py::ssize_t i = 0; i < view.shape(0); ++i) flags.push_back(rnv::FrameFlags::from_byte(view(i)));
    return flags;
}

py::object flags_array(const rnv::FeatureSequence& seq) {
    if (!seq.flags()) return py::none();
    const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(seq.flags()->size())};
    py::array_t<std::uint8_t> out(shape);
    auto* p = out.mutable_data();
    for (const auto& f : *seq.flags()) *p++ = f.to_byte();
    return std::move(out);
}

py::dict sequence_dict(const rnv::FeatureSequence& seq) {
    py::dict d;
    d["frame_rate"] = seq.frame_rate();
    d["frames"] = to_array(seq.frames());
    d["flags"] = flags_array(seq);
    return d;
}

rnv::FeatureSequence make_sequence(const FloatArray& frames, float frame_rate,
                                   const std::optional<py::array_t<std::uint8_t>>& flags) {
    return rnv::FeatureSequence(frame_rate, to_matrix(frames), to_flags(flags));
}

py::list segments_list(const rnv::Segmentation& seg) {
    py::list out;
    for (const auto& s : seg) out.append(py::make_tuple(rnv::to_string(s.type), s.start, s.end));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Rhythm and voice conversion over self-supervised speech features";

    m.def(
        "read_rnvf", [](const std::filesystem::path& p) { return sequence_dict(rnv::read_rnvf(p)); }, py::arg("path"),
        "Read an RNVF file into {frame_rate, frames, flags}.");
    m.def(
        "write_rnvf",
        [](const std::filesystem::path& p, const FloatArray& frames, float frame_rate,
           const std::optional<py::array_t<std::uint8_t>>& flags) {
            rnv::write_rnvf(make_sequence(frames, frame_rate, flags), p);
        },
        py::arg("path"), py::arg("frames"), py::arg("frame_rate"), py::arg("flags") = py::none());
    m.def(
        "decode_rnvf",
        [](const py::bytes& b) {
            const std::string s = b;
            return sequence_dict(rnv::decode_rnvf(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
        },
        py::arg("data"));

    m.def(
        "train_segmenter",
        [](const std::vector<FloatArray>& frames, const std::vector<py::array_t<std::uint8_t>>& flags,
           float frame_rate, std::size_t k, std::uint64_t seed, const std::filesystem::path& out) {
            if (frames.size() != flags.size()) throw std::invalid_argument("frames and flags differ in length");
            std::vector<rnv::FeatureSequence> seqs;
            for (std::size_t i = 0; i < frames.size(); ++i) seqs.push_back(make_sequence(frames[i], frame_rate, flags[i]));
            py::gil_scoped_release release;
            rnv::save_segmenter(rnv::train_segmenter(seqs, {.k = k, .seed = seed}), out);
        },
        py::arg("frames"), py::arg("flags"), py::arg("frame_rate"), py::arg("k") = 100, py::arg("seed") = 0,
        py::arg("out"), "Train a segmenter and write it as an RNVS file.");
    m.def(
        "segment",
        [](const std::filesystem::path& model, const FloatArray& frames, float frame_rate, double penalty) {
            const auto seg = rnv::segment_sequence(rnv::load_segmenter(model), make_sequence(frames, frame_rate, {}),
                                                   penalty);
            return segments_list(seg);
        },
        py::arg("segmenter"), py::arg("frames"), py::arg("frame_rate"),
        py::arg("penalty") = rnv::kDefaultSegmentPenalty, "Segment frames into (type, start, end) runs.");

    m.def(
        "fit_gamma",
        [](const std::vector<double>& d) {
            const auto p = rnv::fit_gamma(d);
            return py::make_tuple(p.shape, p.scale);
        },
        py::arg("durations"), "Maximum-likelihood (shape, scale) for durations in seconds.");
    m.def(
        "gamma_cdf", [](double shape, double scale, double x) { return rnv::gamma_cdf({shape, scale, 2}, x); },
        py::arg("shape"), py::arg("scale"), py::arg("x"));
    m.def(
        "gamma_ppf", [](double shape, double scale, double u) { return rnv::gamma_ppf({shape, scale, 2}, u); },
        py::arg("shape"), py::arg("scale"), py::arg("u"));
    m.def(
        "time_stretch", [](const FloatArray& frames, std::size_t n) { return to_array(rnv::time_stretch(to_matrix(frames), n)); },
        py::arg("frames"), py::arg("frames_out"));
    m.def("global_output_length", &rnv::global_output_length, py::arg("frames_in"), py::arg("src_rate"),
          py::arg("tgt_rate"));
    m.def(
        "convert_rhythm",
        [](const FloatArray& frames, float frame_rate, const std::filesystem::path& segmenter,
           const std::filesystem::path& src, const std::filesystem::path& tgt, bool fine, double penalty) {
            const auto seq = make_sequence(frames, frame_rate, {});
            const auto src_model = rnv::load_rhythm_model(src);
            const auto tgt_model = rnv::load_rhythm_model(tgt);
            if (!fine) return to_array(rnv::convert_global(seq, src_model, tgt_model).frames());
            const auto seg = rnv::segment_sequence(rnv::load_segmenter(segmenter), seq, penalty);
            return to_array(rnv::convert_fine(seq, seg, src_model, tgt_model).frames());
        },
        py::arg("frames"), py::arg("frame_rate"), py::arg("segmenter"), py::arg("src_rhythm"), py::arg("tgt_rhythm"),
        py::arg("fine") = true, py::arg("penalty") = rnv::kDefaultSegmentPenalty);

    m.def(
        "knn_convert",
        [](const FloatArray& frames, const std::vector<FloatArray>& pool_frames, std::size_t k) {
            std::vector<rnv::FeatureSequence> bank;
            for (const auto& p : pool_frames) bank.emplace_back(50.0F, to_matrix(p));
            const auto seq = rnv::FeatureSequence(50.0F, to_matrix(frames));
            rnv::FloatMatrix out;
            {
                py::gil_scoped_release release;
                out = rnv::convert_sequence(seq, rnv::build_pool(bank), k).frames();
            }
            return to_array(out);
        },
        py::arg("frames"), py::arg("pool"), py::arg("k") = rnv::kDefaultNeighbours,
        "Replace each frame by the weighted mean of its k most cosine-similar pool frames.");

    m.def("normalize_words", &rnv::normalize_words, py::arg("text"));
    m.def(
        "score_wer",
        [](const std::string& ref, const std::string& hyp) {
            const auto c = rnv::score_wer(ref, hyp);
            py::dict d;
            d["substitutions"] = c.substitutions;
            d["deletions"] = c.deletions;
            d["insertions"] = c.insertions;
            d["n_ref"] = c.n_ref;
            d["wer"] = c.wer();
            return d;
        },
        py::arg("reference"), py::arg("hypothesis"));
}
