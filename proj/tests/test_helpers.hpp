#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "rnv/featstore.hpp"

namespace testing {

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("rnv_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline rnv::FeatureSequence random_sequence(std::mt19937_64& rng, std::size_t n, std::size_t dim, bool flags = false,
                                            float frame_rate = 50.0F) {
    std::normal_distribution<float> normal(0.0F, 1.0F);
    rnv::FloatMatrix m(n, dim);
    for (auto& v : m.data()) v = normal(rng);
    std::optional<std::vector<rnv::FrameFlags>> f;
    if (flags) {
        f.emplace(n);
        std::bernoulli_distribution coin(0.5);
        for (auto& x : *f) {
            x.is_silence = coin(rng);
            x.is_voiced = !x.is_silence && coin(rng);
        }
    }
    return rnv::FeatureSequence(frame_rate, std::move(m), std::move(f));
}

}  // namespace testing
