// phantom.hpp - synthetic short-axis "left ventricle" volumes with analytic flows.
//
// The phantom is a cylinder along z: blood pool (label 1) inside r_i,
// myocardium (label 2) between r_i and r_o, background (label 0) outside.
#pragma once

#include <cstdint>
#include <optional>

#include "flowstrain/volume.hpp"

namespace flowstrain {

inline constexpr LabelVolume::Label kBloodPoolLabel = 1;
inline constexpr LabelVolume::Label kMyocardiumLabel = 2;

// In-plane position of the cylinder axis.
struct AxisCenter {
    double y = 0.0;
    double x = 0.0;
};

// ((W-1)/2, (H-1)/2), the centre of the in-plane grid.
AxisCenter default_center(const Shape3 &shape);

struct PhantomParams {
    Shape3 shape{16, 64, 64};
    double inner_radius = 8.0;   // voxels
    double outer_radius = 14.0;  // voxels
    double background = 0.0;
    double blood_pool = 50.0;
    double myocardium = 100.0;
    double alpha = 0.1;          // in-plane scale of the true flow
    double beta = 0.0;           // axial stretch of the true flow
    double sigma = 1.0;          // Gaussian edge smoothing, voxels
    double noise_sd = 0.0;       // additive Gaussian noise on both images
    std::uint64_t seed = 0;
    std::optional<AxisCenter> center;  // default_center(shape) when unset

    AxisCenter resolved_center() const { return center ? *center : default_center(shape); }
    // Throws InvalidParameter unless 0 < r_i < r_o < min(H, W)/2 and sigma, noise >= 0.
    void validate() const;
};

struct Annulus {
    Volume3 image;
    LabelVolume labels;
};

Annulus make_annulus(const PhantomParams &params);

// u = (alpha*dx, alpha*dy, beta*dz) with offsets from `center` and dz from (D-1)/2.
FlowField make_affine_flow(const Shape3 &shape, AxisCenter center, double alpha, double beta);

struct PhantomPair {
    Volume3 fixed;
    Volume3 moving;
    FlowField true_flow;
    LabelVolume seg_fixed;
    LabelVolume seg_moving;
};

// moving = annulus, fixed = warp_image(moving, true_flow); segmentations likewise
// with warp_labels. Throws InvalidParameter if either annulus would leave the grid.
PhantomPair generate_pair(const PhantomParams &params);

// Separable Gaussian blur with clamp-to-edge borders; sigma = 0 returns the input.
Volume3 gaussian_smooth(const Volume3 &vol, double sigma);

}  // namespace flowstrain
