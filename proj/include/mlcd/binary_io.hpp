#ifndef MLCD_BINARY_IO_HPP
#define MLCD_BINARY_IO_HPP

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>

#include "mlcd/error.hpp"

namespace mlcd::detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

/// Bounds-checked little-endian reader over a byte buffer.
class ByteReader {
public:
    ByteReader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string take(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& source() const { return source_; }

    [[noreturn]] void fail(const std::string& why) const { throw Error(ErrorCode::Format, source_ + ": " + why); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) fail("truncated file");
    }

    const std::string& bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace mlcd::detail

#endif  // MLCD_BINARY_IO_HPP
