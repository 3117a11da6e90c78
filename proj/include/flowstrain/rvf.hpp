// rvf.hpp - raw volume file I/O.
//
// Layout (little-endian, no padding):
//   bytes 0-3   magic "RVF1"
//   u32 D, H, W, C         C in {1, 3, 9}
//   f32 sz, sy, sx         spacing in mm
//   C*D*H*W f32 samples    channels interleaved, then x, then y, then z
#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "flowstrain/volume.hpp"

namespace flowstrain {

// Untyped file contents; channel count decides the typed interpretation.
struct RvfImage {
    Shape3 shape;
    Spacing3 spacing;
    std::uint32_t channels = 1;
    std::vector<float> samples;
};

void write_rvf(const RvfImage &img, const std::filesystem::path &path);
// Throws FormatError for bad magic, short/long files, zero dims, unsupported C or non-finite samples.
RvfImage read_rvf(const std::filesystem::path &path);

// Samples are stored as 32-bit floats; values that are not float-representable are rounded.
void save_rvf(const Volume3 &vol, const std::filesystem::path &path);
void save_rvf(const FlowField &flow, const std::filesystem::path &path);
void save_rvf(const LabelVolume &labels, const std::filesystem::path &path);

// C=1 loads as Volume3, C=3 as FlowField; C=9 is reserved for tensor fields (see strain.hpp).
std::variant<Volume3, FlowField> load_rvf(const std::filesystem::path &path);
Volume3 load_volume(const std::filesystem::path &path);
FlowField load_flow(const std::filesystem::path &path);
// Requires C=1 and non-negative integral samples.
LabelVolume load_labels(const std::filesystem::path &path);

// Rounds every sample through float32, i.e. exactly what a save/load round trip produces.
FlowField quantize_f32(const FlowField &flow);

}  // namespace flowstrain
