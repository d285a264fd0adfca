#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hlstm/labels.hpp"
#include "hlstm/tensor.hpp"

namespace hlstm {

/// Single-channel raster as stored in a binary PGM.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::uint16_t maxval = 255;
    std::vector<std::uint16_t> values;

    bool operator==(const GrayImage&) const = default;
};

/// Binary PPM (P6, maxval 255) to a (3, H, W) tensor with values in [0, 1].
/// Throws FileError when the file cannot be read and FormatError when it is malformed.
Tensor read_ppm(const std::string& path);
/// Values are clamped to [0, 1] and rounded to 8 bits.
void write_ppm(const std::string& path, const Tensor& image);

/// Binary PGM (P5). maxval > 255 uses 16-bit big-endian samples.
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& image);

SurfaceLabelMap read_label_pgm(const std::string& path, std::size_t num_classes);
void write_label_pgm(const std::string& path, const SurfaceLabelMap& labels);

/// Rounds every value to the nearest multiple of 1/255, the set PPM stores exactly.
void quantize_8bit(Tensor& image);

}  // namespace hlstm
