// volume.hpp - grid types, interpolation and warping.
//
// Index order is (z, y, x) with x fastest in memory. Flow fields hold three
// interleaved displacement channels per voxel in the order (u_x, u_y, u_z),
// in voxel units, where x runs along W, y along H and z along D.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace flowstrain {

struct Shape3 {
    std::size_t d = 1;
    std::size_t h = 1;
    std::size_t w = 1;

    std::size_t voxels() const { return d * h * w; }
    std::size_t index(std::size_t z, std::size_t y, std::size_t x) const { return (z * h + y) * w + x; }
    bool operator==(const Shape3 &) const = default;
};

// Millimetres per voxel along (z, y, x).
struct Spacing3 {
    double z = 1.0;
    double y = 1.0;
    double x = 1.0;
    bool operator==(const Spacing3 &) const = default;
};

// Continuous position in voxel coordinates.
struct Point3 {
    double z = 0.0;
    double y = 0.0;
    double x = 0.0;
};

enum class Boundary {
    Clamp,  // border replication
    Zero,   // samples outside the grid read as 0
};

class Volume3 {
  public:
    Volume3() = default;
    explicit Volume3(Shape3 shape, Spacing3 spacing = {}, double fill = 0.0);
    // Throws InvalidParameter on a zero dimension, wrong data length or non-finite data.
    Volume3(Shape3 shape, Spacing3 spacing, std::vector<double> data);

    const Shape3 &shape() const { return shape_; }
    const Spacing3 &spacing() const { return spacing_; }
    void set_spacing(Spacing3 s) { spacing_ = s; }
    std::size_t size() const { return data_.size(); }

    double &at(std::size_t z, std::size_t y, std::size_t x) { return data_[shape_.index(z, y, x)]; }
    double at(std::size_t z, std::size_t y, std::size_t x) const { return data_[shape_.index(z, y, x)]; }
    double &operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double> &data() { return data_; }
    const std::vector<double> &data() const { return data_; }

    bool operator==(const Volume3 &) const = default;

  private:
    Shape3 shape_;
    Spacing3 spacing_;
    std::vector<double> data_;
};

class FlowField {
  public:
    FlowField() = default;
    explicit FlowField(Shape3 shape, Spacing3 spacing = {});
    // Interleaved (u_x, u_y, u_z) per voxel; throws InvalidParameter like Volume3.
    FlowField(Shape3 shape, Spacing3 spacing, std::vector<double> data);

    const Shape3 &shape() const { return shape_; }
    const Spacing3 &spacing() const { return spacing_; }
    void set_spacing(Spacing3 s) { spacing_ = s; }
    std::size_t voxels() const { return shape_.voxels(); }

    // Channel c: 0 = u_x, 1 = u_y, 2 = u_z.
    double &at(std::size_t voxel, std::size_t c) { return data_[3 * voxel + c]; }
    double at(std::size_t voxel, std::size_t c) const { return data_[3 * voxel + c]; }

    std::vector<double> &data() { return data_; }
    const std::vector<double> &data() const { return data_; }

    bool all_finite() const;
    bool operator==(const FlowField &) const = default;

  private:
    Shape3 shape_;
    Spacing3 spacing_;
    std::vector<double> data_;
};

class LabelVolume {
  public:
    using Label = std::int32_t;

    LabelVolume() = default;
    explicit LabelVolume(Shape3 shape, Label fill = 0);
    // Throws InvalidParameter on a zero dimension, wrong length or a negative label.
    LabelVolume(Shape3 shape, std::vector<Label> labels);

    const Shape3 &shape() const { return shape_; }
    std::size_t size() const { return labels_.size(); }
    Label &at(std::size_t z, std::size_t y, std::size_t x) { return labels_[shape_.index(z, y, x)]; }
    Label at(std::size_t z, std::size_t y, std::size_t x) const { return labels_[shape_.index(z, y, x)]; }
    Label &operator[](std::size_t i) { return labels_[i]; }
    Label operator[](std::size_t i) const { return labels_[i]; }
    std::vector<Label> &labels() { return labels_; }
    const std::vector<Label> &labels() const { return labels_; }

    bool operator==(const LabelVolume &) const = default;

  private:
    Shape3 shape_;
    std::vector<Label> labels_;
};

// Interpolated value and its derivative with respect to the sample position.
struct SampleGradient {
    double value = 0.0;
    double dz = 0.0;
    double dy = 0.0;
    double dx = 0.0;
};

// Trilinear interpolation. Throws InvalidCoordinate for a non-finite position.
double trilinear_sample(const Volume3 &vol, Point3 p, Boundary boundary = Boundary::Clamp);

// Same interpolant plus its exact (piecewise) spatial derivative. Along a
// clamped axis the derivative is 0 outside [0, dim-1].
SampleGradient trilinear_sample_gradient(const Volume3 &vol, Point3 p, Boundary boundary = Boundary::Clamp);

// out(p) = moving(p + flow(p)).
Volume3 warp_image(const Volume3 &moving, const FlowField &flow, Boundary boundary = Boundary::Clamp);

// Nearest-neighbour warp; rounds half away from zero and clamps to the grid.
LabelVolume warp_labels(const LabelVolume &seg, const FlowField &flow);

// Throws ShapeMismatch naming `what` when the shapes differ.
void require_same_shape(const Shape3 &a, const Shape3 &b, const char *what);

}  // namespace flowstrain
