#pragma once

// Little-endian byte packing shared by the RNVF and RNVS codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace rnv::detail {

class ByteWriter {
public:
    explicit ByteWriter(std::size_t reserve = 0) { out_.reserve(reserve); }

    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f32s(std::span<const float> vs) {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(vs.data(), vs.size_bytes());
        } else {
            for (float v : vs) f32(v);
        }
    }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

// Reader that reports the offset of the first short read.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    bool has(std::size_t n) const noexcept { return remaining() >= n; }

    // Callers check has() first; these assume the bytes are present.
    std::uint8_t u8() { return in_[pos_++]; }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    void f32s(std::span<float> out) {
        if (out.empty()) return;
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(out.data(), in_.data() + pos_, out.size_bytes());
            pos_ += out.size_bytes();
        } else {
            for (float& v : out) v = f32();
        }
    }
    std::string str(std::size_t n) {
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace rnv::detail
