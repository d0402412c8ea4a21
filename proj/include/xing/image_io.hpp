#pragma once

// PNG export for generated images and attention maps. Only 8-bit RGB,
// unfiltered scanlines, single IDAT. Enough for inspection output; reading
// PNGs back is not supported.

#include <cstdint>
#include <string>
#include <vector>

#include "xing/tensor.hpp"

namespace xing {

// [-1, 1] -> [0, 255], round half up, clamped.
std::uint8_t to_byte(float v);

// chw is [3, H, W] in [-1, 1]. Interleaves to RGB rows and encodes.
std::vector<std::uint8_t> encode_png(const Tensor<float>& chw);

// Raw interleaved RGB bytes, row-major, 3 * w * h of them.
std::vector<std::uint8_t> encode_png_rgb(const std::vector<std::uint8_t>& rgb,
                                         long h, long w);

void write_png(const std::string& path, const Tensor<float>& chw);

// Min-max normalizes a [H, W] map to [0, 255] grayscale (replicated to RGB).
// A constant map comes out all zero.
std::vector<std::uint8_t> gray_bytes(const Tensor<float>& hw);
void write_gray_png(const std::string& path, const Tensor<float>& hw);

// Tiles equally sized RGB cells into a rows x cols sheet with a 2px separator.
// Each cell is interleaved RGB of cell_h * cell_w pixels. Short rows are
// padded with black cells.
std::vector<std::uint8_t> tile_grid(const std::vector<std::vector<std::uint8_t>>& cells,
                                    long cell_h, long cell_w, long cols,
                                    long* out_h, long* out_w);

// Interleaved RGB cell from a [3, H, W] tensor in [-1, 1].
std::vector<std::uint8_t> rgb_cell(const Tensor<float>& chw);
// Grayscale-replicated cell from a [H, W] map, min-max normalized.
std::vector<std::uint8_t> gray_cell(const Tensor<float>& hw);

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace xing
