#pragma once

#include <filesystem>

#include "radap/core/field.hpp"
#include "radap/core/image.hpp"

namespace radap::core {

// Binary PGM (P5) / PPM (P6), 8-bit. Masks are stored as PGM with
// 0 = background and 255 = patch; images as PPM with [0,1] scaled to [0,255].

void write_pgm(const std::filesystem::path& path, const IntField& gray255);
IntField read_pgm(const std::filesystem::path& path);

// Strictly two-valued {0, 255} mask files.
void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask_pgm(const std::filesystem::path& path, MaskOrigin origin);

void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

}  // namespace radap::core
