// imaging.hpp - per-slice 8-bit PGM renderings of scalar and tensor fields.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowstrain/strain.hpp"
#include "flowstrain/volume.hpp"

namespace flowstrain {

struct SliceImageInfo {
    std::string component;
    double min = 0.0;                 // over valid voxels
    double max = 0.0;
    bool degenerate_range = false;    // max == min, or no valid voxel
    std::vector<std::string> files;   // file names, one per z slice
    std::filesystem::path sidecar;
};

// Writes <prefix>_z000.pgm ... one per slice plus <prefix>.json. Valid voxels
// map linearly from [min, max] onto 0..255 (128 when the range is degenerate);
// invalid voxels are 0. `valid` may be empty (all valid). Throws IoError.
SliceImageInfo emit_slice_images(const Volume3 &field, const std::vector<std::uint8_t> &valid,
                                 const std::string &component, const std::filesystem::path &prefix);

SliceImageInfo emit_slice_images(const TensorField3 &field, std::size_t row, std::size_t col,
                                 const std::string &component, const std::filesystem::path &prefix);

// Reads a binary (P5) PGM written by emit_slice_images.
struct PgmImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;
};
PgmImage read_pgm(const std::filesystem::path &path);

}  // namespace flowstrain
