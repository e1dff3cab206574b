#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "textmask/raster.hpp"

namespace textmask::io {

// Single-channel raster as stored on disk; values are label ids.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> pixels;
};

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB
};

// Reads binary PGM (P5, maxval <= 65535) or grayscale PNG (8 or 16 bit),
// chosen by content signature.
GrayImage read_gray(const std::filesystem::path& path);

// Format chosen by extension: .png writes PNG, anything else binary PGM.
// Bit depth is 8 when every value fits, 16 otherwise.
void write_gray(const std::filesystem::path& path, const GrayImage& image);
void write_rgb(const std::filesystem::path& path, const RgbImage& image);

// Label table json: {"0": "others", "1": "sky", ...}.
LabelTable read_label_table(const std::filesystem::path& path);
LabelTable parse_label_table(const std::string& json_text);
std::string label_table_json(const LabelTable& table);

LabelMask read_label_mask(const std::filesystem::path& path, const LabelTable& table);
// Nonzero pixels become 1.
BinaryGrid read_binary_mask(const std::filesystem::path& path);

void write_label_grid(const std::filesystem::path& path, const LabelGrid& grid);
void write_label_mask(const std::filesystem::path& path, const LabelMask& mask);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace textmask::io
