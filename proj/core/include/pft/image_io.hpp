#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "pft/tensor.hpp"

namespace pft {

// Binary PPM (P6, maxval <= 255) to a 3 x H x W tensor scaled to [0, 1].
Tensor read_ppm(const std::filesystem::path& path);
Tensor decode_ppm(const std::string& bytes);
// 3 x H x W in [0, 1] to 8-bit P6 (values clamped and rounded).
void write_ppm(const std::filesystem::path& path, const Tensor& image);
std::string encode_ppm(const Tensor& image);

// H x W in [0, 1] to 8-bit P5, and back.
void write_pgm(const std::filesystem::path& path, const Tensor& gray);
std::string encode_pgm(const Tensor& gray);
Tensor read_pgm(const std::filesystem::path& path);

// Half-pixel-centred bilinear resize of a C x H x W image.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

}  // namespace pft
