#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dwos/fields.hpp"

namespace dwos {

/// Grayscale float image. Row 0 is the bottom row (smallest y).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h, fill) {}
  float& at(std::size_t i, std::size_t j) { return pixels[j * width + i]; }
  float at(std::size_t i, std::size_t j) const { return pixels[j * width + i]; }
};

/// Writes bytes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Little-endian grayscale PFM ("Pf", scale -1), bottom row first.
std::string encode_pfm(const Image& img);
Image decode_pfm(const std::string& bytes);
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

/// Texture CSV: header line "nx,ny,xmin,ymin,xmax,ymax", then ny rows of nx
/// values, row j holding texels (0..nx-1, j).
std::string encode_texture_csv(const GridTexture& tex);
GridTexture decode_texture_csv(const std::string& text);
void write_texture_csv(const std::filesystem::path& path, const GridTexture& tex);
GridTexture read_texture_csv(const std::filesystem::path& path);

/// Texel values as an nx x ny image.
Image texture_image(const GridTexture& tex);
/// Gradient buffer as an image.
Image gradient_image(const GradientBuffer& g);

}  // namespace dwos
