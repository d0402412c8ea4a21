#include "xing/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace xing {

std::uint8_t to_byte(float v) {
    double mapped = (static_cast<double>(v) + 1.0) * 0.5 * 255.0;
    long r = static_cast<long>(std::floor(mapped + 0.5));
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<std::uint8_t>(r);
}

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
    put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    put_u32_be(out, crc);
}

std::vector<std::uint8_t> deflate_bytes(const std::vector<std::uint8_t>& raw) {
    uLongf cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(cap);
    int rc = compress2(packed.data(), &cap, raw.data(),
                       static_cast<uLong>(raw.size()), Z_BEST_SPEED);
    if (rc != Z_OK) throw std::runtime_error("png: deflate failed");
    packed.resize(cap);
    return packed;
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb(const std::vector<std::uint8_t>& rgb,
                                         long h, long w) {
    if (h < 1 || w < 1 || rgb.size() != static_cast<std::size_t>(3 * h * w))
        throw std::invalid_argument("png: rgb buffer does not match dimensions");

    // Filter byte 0 in front of every scanline.
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(h) * (1 + 3 * w));
    for (long y = 0; y < h; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = rgb.data() + static_cast<std::size_t>(3 * y * w);
        raw.insert(raw.end(), row, row + 3 * w);
    }

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(w));
    put_u32_be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", deflate_bytes(raw));
    put_chunk(out, "IEND", {});
    return out;
}

std::vector<std::uint8_t> rgb_cell(const Tensor<float>& chw) {
    if (chw.shape.size() != 3 || chw.shape[0] != 3)
        throw std::invalid_argument("png: expected a [3, H, W] tensor");
    int h = static_cast<int>(chw.shape[1]), w = static_cast<int>(chw.shape[2]);
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(3 * h * w));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                rgb[static_cast<std::size_t>(3 * (y * w + x) + c)] =
                    to_byte(chw.at({c, y, x}));
    return rgb;
}

std::vector<std::uint8_t> encode_png(const Tensor<float>& chw) {
    return encode_png_rgb(rgb_cell(chw), chw.shape[1], chw.shape[2]);
}

std::vector<std::uint8_t> gray_bytes(const Tensor<float>& hw) {
    if (hw.shape.size() != 2)
        throw std::invalid_argument("png: expected a [H, W] map");
    float lo = hw.data[0], hi = hw.data[0];
    for (float v : hw.data) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    double span = static_cast<double>(hi) - static_cast<double>(lo);
    std::vector<std::uint8_t> bytes(hw.numel());
    for (std::size_t i = 0; i < hw.numel(); ++i) {
        double u = span > 0.0 ? (static_cast<double>(hw.data[i]) - lo) / span : 0.0;
        long r = static_cast<long>(std::floor(u * 255.0 + 0.5));
        if (r < 0) r = 0;
        if (r > 255) r = 255;
        bytes[i] = static_cast<std::uint8_t>(r);
    }
    return bytes;
}

std::vector<std::uint8_t> gray_cell(const Tensor<float>& hw) {
    std::vector<std::uint8_t> g = gray_bytes(hw);
    std::vector<std::uint8_t> rgb(g.size() * 3);
    for (std::size_t i = 0; i < g.size(); ++i)
        rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = g[i];
    return rgb;
}

std::vector<std::uint8_t> tile_grid(const std::vector<std::vector<std::uint8_t>>& cells,
                                    long cell_h, long cell_w, long cols,
                                    long* out_h, long* out_w) {
    if (cells.empty() || cols < 1)
        throw std::invalid_argument("png: empty grid");
    for (const auto& c : cells)
        if (c.size() != static_cast<std::size_t>(3 * cell_h * cell_w))
            throw std::invalid_argument("png: grid cell size mismatch");
    const long sep = 2;
    long rows = (static_cast<long>(cells.size()) + cols - 1) / cols;
    long h = rows * cell_h + (rows - 1) * sep;
    long w = cols * cell_w + (cols - 1) * sep;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(3 * h * w), 0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        long r = static_cast<long>(i) / cols;
        long c = static_cast<long>(i) % cols;
        long y0 = r * (cell_h + sep);
        long x0 = c * (cell_w + sep);
        for (long y = 0; y < cell_h; ++y) {
            const std::uint8_t* src = cells[i].data() + static_cast<std::size_t>(3 * y * cell_w);
            std::uint8_t* dst = rgb.data() + static_cast<std::size_t>(3 * ((y0 + y) * w + x0));
            std::copy(src, src + 3 * cell_w, dst);
        }
    }
    *out_h = h;
    *out_w = w;
    return rgb;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("short write: " + path);
}

void write_png(const std::string& path, const Tensor<float>& chw) {
    write_file(path, encode_png(chw));
}

void write_gray_png(const std::string& path, const Tensor<float>& hw) {
    write_file(path, encode_png_rgb(gray_cell(hw), hw.shape[0], hw.shape[1]));
}

}  // namespace xing
