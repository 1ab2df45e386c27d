#ifndef GROCE_BINARY_IO_HPP
#define GROCE_BINARY_IO_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "groce/errors.hpp"

namespace groce::detail {

template <typename T>
T byteswap_if_big(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        return std::bit_cast<T>(bytes);
    } else {
        return value;
    }
}

/// Little-endian writer over an in-memory buffer.
class ByteWriter {
public:
    void raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    template <typename T>
    void put(T value) {
        value = byteswap_if_big(value);
        const auto* p = reinterpret_cast<const char*>(&value);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    template <typename T>
    void put_array(const std::vector<T>& values) {
        if constexpr (std::endian::native == std::endian::little) {
            const auto* p = reinterpret_cast<const char*>(values.data());
            buf_.insert(buf_.end(), p, p + values.size() * sizeof(T));
        } else {
            for (const T& v : values) put(v);
        }
    }

    const std::vector<char>& bytes() const noexcept { return buf_; }

    void write_file(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing", path);
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw IoError("write failed", path);
    }

private:
    std::vector<char> buf_;
};

/// Little-endian reader with bounds checks; short reads raise FormatError.
class ByteReader {
public:
    explicit ByteReader(std::vector<char> data) : data_(std::move(data)) {}

    static ByteReader from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) throw IoError("file not found", path);
        const auto size = static_cast<std::size_t>(in.tellg());
        std::vector<char> data(size);
        in.seekg(0);
        in.read(data.data(), static_cast<std::streamsize>(size));
        if (!in) throw IoError("read failed", path);
        return ByteReader(std::move(data));
    }

    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    void expect_magic(std::string_view magic, std::string_view what) {
        require(magic.size(), what);
        if (std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0) {
            throw FormatError("bad magic for " + std::string(what) + " (expected " + std::string(magic) + ")");
        }
        pos_ += magic.size();
    }

    template <typename T>
    T get(std::string_view what) {
        require(sizeof(T), what);
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return byteswap_if_big(value);
    }

    template <typename T>
    std::vector<T> get_array(std::size_t count, std::string_view what) {
        require(count * sizeof(T), what);
        std::vector<T> out(count);
        std::memcpy(out.data(), data_.data() + pos_, count * sizeof(T));
        pos_ += count * sizeof(T);
        if constexpr (std::endian::native == std::endian::big) {
            for (T& v : out) v = byteswap_if_big(v);
        }
        return out;
    }

    std::string get_string(std::size_t length, std::string_view what) {
        require(length, what);
        std::string s(data_.data() + pos_, length);
        pos_ += length;
        return s;
    }

    void require(std::size_t bytes, std::string_view what) const {
        if (remaining() < bytes) {
            throw FormatError("truncated " + std::string(what) + ": expected " + std::to_string(bytes) +
                              " bytes, found " + std::to_string(remaining()));
        }
    }

private:
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

/// 64-bit FNV-1a.
class Fnv1a {
public:
    void update(const void* data, std::size_t size) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }

    template <typename T>
    void update_value(T value) {
        value = byteswap_if_big(value);
        update(&value, sizeof(T));
    }

    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace groce::detail

#endif  // GROCE_BINARY_IO_HPP
