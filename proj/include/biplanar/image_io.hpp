#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "biplanar/render.hpp"

namespace biplanar {

/// Quantized grayscale raster, row-major. `bit_depth` is 8 or 16; 8-bit
/// images keep their samples in the low byte of each element.
struct GrayImage {
  int rows = 0;
  int cols = 0;
  int bit_depth = 16;
  std::vector<std::uint16_t> pixels;

  std::uint16_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const GrayImage&) const = default;
};

enum class ImageFormat { PGM16, PNG16 };

ImageFormat parse_image_format(std::string_view text);
std::string_view file_extension(ImageFormat format);

/// Applies `mapping` and quantizes to 16 bits. A zero-width range maps to 0.
GrayImage quantize(const RadiographImage& img, const ExportMapping& mapping);

/// Quantizes with `img.mapping` and writes the file; no flips are applied.
/// Throws IoError.
void export_image(const RadiographImage& img, const std::filesystem::path& path, ImageFormat format);

std::string encode_pgm(const GrayImage& img);
std::string encode_png(const GrayImage& img);
void write_image(const GrayImage& img, const std::filesystem::path& path, ImageFormat format);

/// Decodes binary PGM (P5, 8 or 16 bit) or grayscale PNG (8 or 16 bit) by
/// content, not extension. Throws UnreadableImage.
GrayImage decode_image(std::string_view bytes);
GrayImage read_image(const std::filesystem::path& path);

/// 8-bit, box-filtered so that neither side exceeds `max_side`.
/// Rescales the full input range to 0..255.
GrayImage preview8(const GrayImage& img, int max_side);

}  // namespace biplanar
