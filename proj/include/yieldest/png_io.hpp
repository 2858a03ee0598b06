#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "yieldest/imaging.hpp"

namespace yieldest {

/// 8-bit RGB PNG. Grayscale/alpha/palette inputs are expanded to RGB.
RgbImage read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& img);

/// In-memory PNG encoding, used by the HTTP frame endpoint.
std::string encode_png_rgb(const RgbImage& img);

/// Single-channel PNG with 0/255 values. Any nonzero value reads as true.
BinaryMask read_png_mask(const std::filesystem::path& path);
void write_png_mask(const std::filesystem::path& path, const BinaryMask& mask);

/// 16-bit grayscale label map (debug output of superpixel ids).
void write_png_labels16(const std::filesystem::path& path, int width, int height,
                        const std::vector<int>& labels);

}  // namespace yieldest
