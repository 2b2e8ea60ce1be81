#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "handjog/error.hpp"

namespace handjog {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

class ByteWriter {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void i32(std::int32_t v) { raw(&v, sizeof v); }
    void i8(std::int8_t v) { raw(&v, sizeof v); }
    void f32(float v) { raw(&v, sizeof v); }

    std::vector<std::uint8_t> take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void raw(void* p, std::size_t n) {
        if (bytes_.size() - pos_ < n) {
            throw ValidationError("truncated file: need " + std::to_string(n) + " bytes at offset " +
                                  std::to_string(pos_));
        }
        std::memcpy(p, bytes_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::int32_t i32() { return get<std::int32_t>(); }
    std::int8_t i8() { return get<std::int8_t>(); }
    float f32() { return get<float>(); }

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    template <typename T>
    T get() {
        T v;
        raw(&v, sizeof v);
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace handjog
