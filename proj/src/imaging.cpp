#include "flowstrain/imaging.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "flowstrain/error.hpp"

namespace flowstrain {

namespace {

void write_bytes(const std::filesystem::path &path, const std::string &bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

SliceImageInfo emit_slice_images(const Volume3 &field, const std::vector<std::uint8_t> &valid,
                                 const std::string &component, const std::filesystem::path &prefix) {
    const Shape3 s = field.shape();
    if (!valid.empty() && valid.size() != s.voxels()) throw ShapeMismatch("validity mask does not match the field");
    auto is_valid = [&](std::size_t i) { return valid.empty() || valid[i] != 0; };

    SliceImageInfo info;
    info.component = component;
    bool any = false;
    for (std::size_t i = 0; i < s.voxels(); ++i) {
        if (!is_valid(i)) continue;
        const double v = field[i];
        if (!any || v < info.min) info.min = v;
        if (!any || v > info.max) info.max = v;
        any = true;
    }
    info.degenerate_range = !any || info.max == info.min;
    const double range = info.max - info.min;

    const std::string stem = prefix.filename().string();
    const std::filesystem::path dir = prefix.parent_path();
    for (std::size_t z = 0; z < s.d; ++z) {
        std::string bytes = "P5\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
        bytes.reserve(bytes.size() + s.h * s.w);
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                const std::size_t i = s.index(z, y, x);
                unsigned char px = 0;
                if (is_valid(i)) {
                    px = info.degenerate_range
                             ? 128
                             : static_cast<unsigned char>(std::floor(255.0 * (field[i] - info.min) / range + 0.5));
                }
                bytes.push_back(static_cast<char>(px));
            }
        char name[32];
        std::snprintf(name, sizeof name, "_z%03zu.pgm", z);
        const std::string file = stem + name;
        write_bytes(dir / file, bytes);
        info.files.push_back(file);
    }

    nlohmann::json side = {{"schema_version", 1},  {"component", component},
                           {"min", info.min},      {"max", info.max},
                           {"degenerate_range", info.degenerate_range},
                           {"slices", s.d},        {"width", s.w},
                           {"height", s.h},        {"files", info.files}};
    info.sidecar = dir / (stem + ".json");
    write_bytes(info.sidecar, side.dump(2) + "\n");
    return info;
}

SliceImageInfo emit_slice_images(const TensorField3 &field, std::size_t row, std::size_t col,
                                 const std::string &component, const std::filesystem::path &prefix) {
    return emit_slice_images(field.component(row, col), field.valid_mask(), component, prefix);
}

PgmImage read_pgm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string magic;
    std::size_t maxval = 0;
    PgmImage img;
    in >> magic >> img.width >> img.height >> maxval;
    if (!in || magic != "P5" || maxval != 255) throw FormatError("'" + path.string() + "' is not an 8-bit P5 PGM");
    in.get();
    img.pixels.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (img.pixels.size() != img.width * img.height) throw FormatError("'" + path.string() + "': truncated PGM");
    return img;
}

}  // namespace flowstrain
