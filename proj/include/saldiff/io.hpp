#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "saldiff/errors.hpp"
#include "saldiff/tensor.hpp"

namespace saldiff::io {

// Little-endian binary buffer helpers shared by the dataset, checkpoint and
// map-export formats.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) {
        buf_.push_back(static_cast<uint8_t>(v & 0xff));
        buf_.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
    }
    void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
    void bytes(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    // Element-count prefix followed by f32 payload.
    void f32_array(const std::vector<double>& v) {
        u32(static_cast<uint32_t>(v.size()));
        for (double d : v) f32(static_cast<float>(d));
    }
    const std::vector<uint8_t>& data() const { return buf_; }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<uint8_t> data) : buf_(std::move(data)) {}

    uint8_t u8() { return take(1)[0]; }
    uint16_t u16() {
        const uint8_t* p = take(2);
        return static_cast<uint16_t>(p[0] | (p[1] << 8));
    }
    uint32_t u32() {
        const uint8_t* p = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        const uint8_t* p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        uint32_t n = u32();
        const uint8_t* p = take(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    std::vector<double> f32_array() {
        uint32_t n = u32();
        std::vector<double> v(n);
        for (uint32_t i = 0; i < n; ++i) v[i] = static_cast<double>(f32());
        return v;
    }
    bool done() const { return pos_ == buf_.size(); }
    size_t remaining() const { return buf_.size() - pos_; }

private:
    const uint8_t* take(size_t n) {
        if (pos_ + n > buf_.size()) throw DataError("binary record truncated");
        const uint8_t* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::vector<uint8_t> buf_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// 8-bit binary PGM, header "P5 <w> <h> 255", values round(255 * clamp01(v)).
void write_pgm(const std::string& path, const Tensor& map);
// Raw float32 sidecar, row-major, no header.
void write_f32_raw(const std::string& path, const Tensor& map);
Tensor read_f32_raw(const std::string& path, int h, int w);

}  // namespace saldiff::io
