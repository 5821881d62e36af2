#pragma once
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "oacnn/errors.hpp"

// Little-endian binary stream helpers. All container formats are written
// byte-explicitly so files are identical across platforms.

namespace oacnn {

class BinaryWriter {
  public:
    explicit BinaryWriter(const std::string &path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open for writing: " + path);
    }

    void bytes(const void *data, std::size_t n) {
        out_.write(static_cast<const char *>(data), std::streamsize(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) { put_le(v, 2); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void i32(std::int32_t v) { put_le(std::uint32_t(v), 4); }
    void f32(float v) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        put_le(u, 4);
    }
    void magic(const char tag[5]) { bytes(tag, 4); }
    void str(const std::string &s) {
        u32(std::uint32_t(s.size()));
        bytes(s.data(), s.size());
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write failed: " + path_);
    }

  private:
    void put_le(std::uint64_t v, int n) {
        unsigned char buf[8];
        for (int i = 0; i < n; ++i) buf[i] = (unsigned char)((v >> (8 * i)) & 0xff);
        bytes(buf, std::size_t(n));
    }
    std::string path_;
    std::ofstream out_;
};

class BinaryReader {
  public:
    explicit BinaryReader(const std::string &path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open for reading: " + path);
    }

    void bytes(void *data, std::size_t n) {
        in_.read(static_cast<char *>(data), std::streamsize(n));
        if (std::size_t(in_.gcount()) != n)
            throw ParseError(path_ + ": truncated at byte offset " + std::to_string(offset()));
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint16_t u16() { return std::uint16_t(get_le(2)); }
    std::uint32_t u32() { return std::uint32_t(get_le(4)); }
    std::uint64_t u64() { return get_le(8); }
    std::int32_t i32() { return std::int32_t(std::uint32_t(get_le(4))); }
    float f32() {
        const std::uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    void expect_magic(const char tag[5]) {
        char buf[4];
        bytes(buf, 4);
        if (std::memcmp(buf, tag, 4) != 0)
            throw ParseError(path_ + ": bad magic, expected " + std::string(tag, 4));
    }
    std::string str(std::size_t max_len = 1u << 20) {
        const std::uint32_t n = u32();
        if (n > max_len) throw ParseError(path_ + ": string length " + std::to_string(n) + " too large");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::int64_t offset() { return std::int64_t(in_.tellg()); }
    bool at_eof() {
        return in_.peek() == std::char_traits<char>::eof();
    }

  private:
    std::uint64_t get_le(int n) {
        unsigned char buf[8];
        bytes(buf, std::size_t(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
        return v;
    }
    std::string path_;
    std::ifstream in_;
};

} // namespace oacnn
