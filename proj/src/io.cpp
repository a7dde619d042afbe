#include "saldiff/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace saldiff::io {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    f.seekg(0, std::ios::end);
    const auto size = static_cast<size_t>(f.tellg());
    f.seekg(0);
    std::vector<uint8_t> buf(size);
    if (size > 0) f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!f) throw DataError("short read on " + path);
    return buf;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write on " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f << text;
    if (!f) throw DataError("short write on " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

void write_pgm(const std::string& path, const Tensor& map) {
    if (map.rank() != 2) throw ShapeError("write_pgm: expected 2-D map");
    const int h = map.rows(), w = map.cols();
    std::string header = "P5 " + std::to_string(w) + " " + std::to_string(h) + " 255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + static_cast<size_t>(h) * w);
    for (double v : map.data) {
        double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out.push_back(static_cast<uint8_t>(std::lround(255.0 * c)));
    }
    write_file(path, out);
}

void write_f32_raw(const std::string& path, const Tensor& map) {
    ByteWriter w;
    for (double v : map.data) w.f32(static_cast<float>(v));
    write_file(path, w.data());
}

Tensor read_f32_raw(const std::string& path, int h, int w) {
    auto bytes = read_file(path);
    if (bytes.size() != static_cast<size_t>(h) * w * 4)
        throw DataError("raw f32 size mismatch for " + path);
    ByteReader r(std::move(bytes));
    Tensor t({h, w});
    for (auto& v : t.data) v = static_cast<double>(r.f32());
    return t;
}

}  // namespace saldiff::io
