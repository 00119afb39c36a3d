#pragma once

#include <filesystem>

#include "dbini/field.hpp"

namespace dbini {

// PFM: "Pf" grayscale / "PF" 3-channel float maps.  Written little-endian
// (negative scale) with rows stored bottom-up, flipped to top-down in memory.
// PFM carries no pixel pitch, so readers take it as an argument.
void write_pfm(const std::filesystem::path& path, const ScalarField2D& field);
ScalarField2D read_pfm(const std::filesystem::path& path, double pitch);
void write_pfm3(const std::filesystem::path& path, const VectorField2D& field);
VectorField2D read_pfm3(const std::filesystem::path& path, double pitch);

struct MaskImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;  // 0/1, row-major top-down
};

// 8-bit grayscale PNG; a sample > 127 counts as inside the mask.
void write_mask_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& values);
MaskImage read_mask_png(const std::filesystem::path& path);

// 16-bit RGB PNG holding unit vectors, channel c mapping to 2*c/65535 - 1.
// Decoded vectors are renormalized; all-zero pixels are left as zero vectors
// for the domain-aware validation pass to judge.
void write_normal_png16(const std::filesystem::path& path, const VectorField2D& field);
VectorField2D read_normal_png16(const std::filesystem::path& path, double pitch);

}  // namespace dbini
