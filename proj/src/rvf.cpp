#include "flowstrain/rvf.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "flowstrain/error.hpp"

namespace flowstrain {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'F', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 * 4 + 3 * 4;

template <class T>
void put_le(std::vector<unsigned char> &buf, T value) {
    static_assert(sizeof(T) == 4);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &value, 4);
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu));
}

template <class T>
T get_le(const unsigned char *p) {
    static_assert(sizeof(T) == 4);
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    T value;
    std::memcpy(&value, &bits, 4);
    return value;
}

RvfImage from_doubles(const Shape3 &shape, const Spacing3 &spacing, std::uint32_t channels,
                      const std::vector<double> &data) {
    RvfImage img;
    img.shape = shape;
    img.spacing = spacing;
    img.channels = channels;
    img.samples.reserve(data.size());
    for (double v : data) img.samples.push_back(static_cast<float>(v));
    return img;
}

std::vector<double> to_doubles(const std::vector<float> &samples) {
    return std::vector<double>(samples.begin(), samples.end());
}

}  // namespace

void write_rvf(const RvfImage &img, const std::filesystem::path &path) {
    const Shape3 &s = img.shape;
    if (s.d == 0 || s.h == 0 || s.w == 0) throw FormatError("refusing to write RVF with a zero dimension");
    if (img.samples.size() != s.voxels() * img.channels) throw FormatError("RVF sample count does not match header");

    std::vector<unsigned char> buf;
    buf.reserve(kHeaderBytes + 4 * img.samples.size());
    buf.insert(buf.end(), std::begin(kMagic), std::end(kMagic));
    put_le(buf, static_cast<std::uint32_t>(s.d));
    put_le(buf, static_cast<std::uint32_t>(s.h));
    put_le(buf, static_cast<std::uint32_t>(s.w));
    put_le(buf, img.channels);
    put_le(buf, static_cast<float>(img.spacing.z));
    put_le(buf, static_cast<float>(img.spacing.y));
    put_le(buf, static_cast<float>(img.spacing.x));
    for (float v : img.samples) put_le(buf, v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

RvfImage read_rvf(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < kHeaderBytes) throw FormatError("'" + path.string() + "': file too short for RVF header");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("'" + path.string() + "': bad magic");

    const unsigned char *p = buf.data() + 4;
    RvfImage img;
    img.shape.d = get_le<std::uint32_t>(p);
    img.shape.h = get_le<std::uint32_t>(p + 4);
    img.shape.w = get_le<std::uint32_t>(p + 8);
    img.channels = get_le<std::uint32_t>(p + 12);
    img.spacing.z = get_le<float>(p + 16);
    img.spacing.y = get_le<float>(p + 20);
    img.spacing.x = get_le<float>(p + 24);

    if (img.shape.d == 0 || img.shape.h == 0 || img.shape.w == 0) throw FormatError("RVF header declares a zero dimension");
    if (img.channels != 1 && img.channels != 3 && img.channels != 9) {
        throw FormatError("RVF channel count must be 1, 3 or 9, got " + std::to_string(img.channels));
    }
    const std::size_t n = img.shape.voxels() * img.channels;
    if (buf.size() != kHeaderBytes + 4 * n) {
        throw FormatError("'" + path.string() + "': payload size does not match header");
    }
    img.samples.resize(n);
    const unsigned char *payload = buf.data() + kHeaderBytes;
    for (std::size_t i = 0; i < n; ++i) {
        const float v = get_le<float>(payload + 4 * i);
        if (!std::isfinite(v)) throw FormatError("RVF payload contains a non-finite sample");
        img.samples[i] = v;
    }
    return img;
}

void save_rvf(const Volume3 &vol, const std::filesystem::path &path) {
    write_rvf(from_doubles(vol.shape(), vol.spacing(), 1, vol.data()), path);
}

void save_rvf(const FlowField &flow, const std::filesystem::path &path) {
    write_rvf(from_doubles(flow.shape(), flow.spacing(), 3, flow.data()), path);
}

void save_rvf(const LabelVolume &labels, const std::filesystem::path &path) {
    RvfImage img;
    img.shape = labels.shape();
    img.channels = 1;
    img.samples.reserve(labels.size());
    for (auto l : labels.labels()) img.samples.push_back(static_cast<float>(l));
    write_rvf(img, path);
}

std::variant<Volume3, FlowField> load_rvf(const std::filesystem::path &path) {
    RvfImage img = read_rvf(path);
    if (img.channels == 1) return Volume3(img.shape, img.spacing, to_doubles(img.samples));
    if (img.channels == 3) return FlowField(img.shape, img.spacing, to_doubles(img.samples));
    throw FormatError("'" + path.string() + "' holds a 9-channel tensor field, not a volume or flow");
}

Volume3 load_volume(const std::filesystem::path &path) {
    auto v = load_rvf(path);
    if (auto *vol = std::get_if<Volume3>(&v)) return std::move(*vol);
    throw FormatError("'" + path.string() + "' is a flow field, expected a scalar volume");
}

FlowField load_flow(const std::filesystem::path &path) {
    auto v = load_rvf(path);
    if (auto *flow = std::get_if<FlowField>(&v)) return std::move(*flow);
    throw FormatError("'" + path.string() + "' is a scalar volume, expected a flow field");
}

LabelVolume load_labels(const std::filesystem::path &path) {
    const RvfImage img = read_rvf(path);
    if (img.channels != 1) throw FormatError("'" + path.string() + "': label volumes must have C=1");
    std::vector<LabelVolume::Label> labels;
    labels.reserve(img.samples.size());
    for (float v : img.samples) {
        if (v < 0.0f || v != std::floor(v) || v > 65535.0f) {
            throw FormatError("'" + path.string() + "': label samples must be small non-negative integers");
        }
        labels.push_back(static_cast<LabelVolume::Label>(v));
    }
    return LabelVolume(img.shape, std::move(labels));
}

FlowField quantize_f32(const FlowField &flow) {
    FlowField out = flow;
    for (double &v : out.data()) v = static_cast<double>(static_cast<float>(v));
    const Spacing3 s = flow.spacing();
    out.set_spacing({static_cast<float>(s.z), static_cast<float>(s.y), static_cast<float>(s.x)});
    return out;
}

}  // namespace flowstrain
