// strain.hpp - finite strain tensors from dense flow fields.
//
// Tensor index order is (x, y, z) for rows and columns: row i holds the
// derivatives of u_i, column j the derivative along axis j. After rotation
// into cylindrical coordinates the order becomes (r, theta, z).
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowstrain/phantom.hpp"
#include "flowstrain/volume.hpp"

namespace flowstrain {

using Tensor3 = std::array<double, 9>;  // row-major 3x3

class TensorField3 {
  public:
    TensorField3() = default;
    explicit TensorField3(const Shape3 &shape, const Spacing3 &spacing = {});

    const Shape3 &shape() const { return shape_; }
    const Spacing3 &spacing() const { return spacing_; }
    std::size_t voxels() const { return shape_.voxels(); }

    double &at(std::size_t voxel, std::size_t row, std::size_t col) { return data_[9 * voxel + 3 * row + col]; }
    double at(std::size_t voxel, std::size_t row, std::size_t col) const { return data_[9 * voxel + 3 * row + col]; }
    Tensor3 tensor(std::size_t voxel) const;
    void set_tensor(std::size_t voxel, const Tensor3 &t);

    bool valid(std::size_t voxel) const { return valid_[voxel] != 0; }
    // Clearing validity also writes the 0 sentinel into all nine components.
    void invalidate(std::size_t voxel);
    std::size_t valid_count() const;

    std::vector<double> &data() { return data_; }
    const std::vector<double> &data() const { return data_; }
    const std::vector<std::uint8_t> &valid_mask() const { return valid_; }

    // One component as a scalar volume (invalid voxels hold 0).
    Volume3 component(std::size_t row, std::size_t col) const;

  private:
    Shape3 shape_{};
    Spacing3 spacing_{};
    std::vector<double> data_;
    std::vector<std::uint8_t> valid_;
};

enum class StrainKind { Lagrangian, Eulerian };
enum class CoordSystem { Cartesian, Cylindrical };
// Atan2 measures theta from +x towards +y; Literal uses theta = atan(dx/dy).
enum class AngleConvention { Atan2, Literal };

struct StrainFrame {
    StrainKind kind = StrainKind::Lagrangian;
    CoordSystem coords = CoordSystem::Cartesian;
    std::optional<AxisCenter> center;  // default_center(shape) when unset
    AngleConvention angle = AngleConvention::Atan2;
};

inline constexpr double kDeterminantGuard = 1e-8;
inline constexpr double kAxisExclusionRadius = 0.5;

TensorField3 displacement_gradient(const FlowField &flow, const Spacing3 &spacing);
inline TensorField3 displacement_gradient(const FlowField &flow) { return displacement_gradient(flow, flow.spacing()); }

TensorField3 deformation_gradient(const TensorField3 &grad_u);
TensorField3 lagrangian_strain(const TensorField3 &F);
TensorField3 eulerian_strain(const TensorField3 &F);

// Throws InvalidParameter when the center lies outside the in-plane grid.
TensorField3 to_cylindrical(const TensorField3 &T, AxisCenter center,
                            AngleConvention angle = AngleConvention::Atan2);

// flow -> grad u -> F -> E or e -> optional cylindrical rotation.
TensorField3 compute_strain(const FlowField &flow, const StrainFrame &frame);

enum class PeakMode { SignedMax, SignedMin };

struct PeakEntry {
    std::size_t component = 0;  // diagonal index 0..2
    PeakMode mode = PeakMode::SignedMax;
    double value = 0.0;
    std::size_t z = 0, y = 0, x = 0;
};

struct PeakMask {
    const LabelVolume *labels = nullptr;
    std::optional<LabelVolume::Label> label;  // unset: any non-zero label
};

// Extremum of diagonal `component` over valid voxels in slices [trim, D-1-trim]
// that pass the mask. Ties keep the first voxel in memory order.
// Throws InvalidParameter if 2*trim >= D, EmptyDomain if no voxel qualifies.
PeakEntry peak_strain(const TensorField3 &T, std::size_t component, PeakMode mode, std::size_t trim,
                      const PeakMask &mask = {});

struct StrainReport {
    StrainFrame frame;
    AxisCenter center;              // resolved center (cylindrical only)
    std::size_t trim = 0;
    bool masked = false;
    std::optional<LabelVolume::Label> mask_label;
    std::array<std::string, 3> component_names;
    std::array<PeakEntry, 3> peak_max;
    std::array<PeakEntry, 3> peak_min;
    std::size_t valid_voxels = 0;
};

StrainReport summarize_strain(const TensorField3 &T, const StrainFrame &frame, std::size_t trim,
                              const PeakMask &mask = {});

std::array<std::string, 3> component_names(CoordSystem coords);

void save_tensor_rvf(const TensorField3 &T, const std::filesystem::path &path);
// Every loaded voxel is marked valid.
TensorField3 load_tensor_rvf(const std::filesystem::path &path);

}  // namespace flowstrain
