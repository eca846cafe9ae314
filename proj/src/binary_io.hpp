// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

// Little-endian byte packing shared by the binary file formats.

#pragma once

#include "evseg/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace evseg::detail {

class ByteWriter {
  public:
    void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void pad(std::size_t n) { bytes_.insert(bytes_.end(), n, 0); }

    [[nodiscard]] std::vector<std::uint8_t> take() { return std::move(bytes_); }
    [[nodiscard]] std::size_t size() const { return bytes_.size(); }

  private:
    template <typename U> void put(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i)
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
  public:
    ByteReader(std::vector<std::uint8_t> const &bytes, std::string what)
        : bytes_(bytes), what_(std::move(what)) {}

    void expect_magic(std::string_view m) {
        require(m.size());
        if (std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0)
            throw FormatError(what_ + ": bad magic, expected \"" +
                              std::string(m) + "\"");
        pos_ += m.size();
    }
    std::uint8_t u8() { return get<std::uint8_t>(); }
    std::uint16_t u16() { return get<std::uint16_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
    void skip(std::size_t n) {
        require(n);
        pos_ += n;
    }

    /// Throw TruncatedError unless `n` more bytes are available.
    void require(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            throw TruncatedError(pos_ + n, bytes_.size(),
                                 what_ + ": truncated, expected " +
                                     std::to_string(pos_ + n) +
                                     " bytes but file has " +
                                     std::to_string(bytes_.size()));
    }
    [[nodiscard]] std::size_t position() const { return pos_; }
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    template <typename U> U get() {
        require(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }

    std::vector<std::uint8_t> const &bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

} // namespace evseg::detail
