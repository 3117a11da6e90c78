// registration.hpp - cascaded, coarse-to-fine direct optimisation of dense flow fields.
//
// Each cascade minimises  w_cc * (1 - corrcoef(fixed, warp(current, flow))) + w_tv * TV(flow)
// with adaptive-moment descent over a mean-pooled image pyramid; updates that
// raise the loss are undone and retried at half the step. Cascade k
// starts from the moving image warped through the flows of cascades 1..k-1,
// and the per-cascade flows are composed into a single field.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "flowstrain/objective.hpp"
#include "flowstrain/volume.hpp"

namespace flowstrain {

struct CascadeConfig {
    std::size_t num_cascades = 1;
    std::size_t iterations = 200;     // per pyramid level
    std::size_t pyramid_levels = 3;   // x4, x2, x1 downsampling
    double step = 0.1;                // voxels
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LossWeights weights{};
    std::uint64_t seed = 0;
    Boundary boundary = Boundary::Clamp;

    void validate() const;
};

struct LevelTrace {
    std::size_t cascade = 0;          // 0-based
    std::size_t level = 0;            // 0 = full resolution
    Shape3 shape;
    // Loss of the current iterate before each iteration, plus the final one.
    std::vector<LossBreakdown> trajectory;
};

struct DiceEntry {
    LabelVolume::Label label = 0;
    double before = 0.0;
    double after = 0.0;
};

struct RegReport {
    std::vector<LevelTrace> traces;   // cascade-major, coarse to fine
    FlowField flow;                   // composed flow, rounded to float32 precision
    LossBreakdown identity_loss;      // loss at flow = 0
    LossBreakdown final_loss;         // loss of the composed flow
    std::vector<double> cascade_corrcoef_loss;  // after each cascade, through the composed flow
    std::vector<DiceEntry> dice;      // filled when segmentations were supplied
    std::size_t total_iterations = 0;
    double wall_seconds = 0.0;
};

struct Segmentations {
    LabelVolume fixed;
    LabelVolume moving;
    std::vector<LabelVolume::Label> labels;  // empty: every non-zero label present
};

// out(x) = inner(x) + outer(x + inner(x)), outer sampled trilinearly with clamping.
// warp_image(m, out) approximates warp_image(warp_image(m, outer), inner).
FlowField compose_flows(const FlowField &inner, const FlowField &outer);

// 2x2x2 mean pooling; odd extents round up and average the voxels present.
// Axes of extent 1 are left alone.
Volume3 downsample2(const Volume3 &vol);

// Trilinear upsampling onto `fine` with displacements rescaled by the per-axis
// resolution ratio (x2 along halved axes).
FlowField upsample_flow2(const FlowField &coarse, const Shape3 &fine);

// Minimises the loss of warp(current_moving, flow) against `fixed` and returns
// the full-resolution flow. Appends one LevelTrace per pyramid level to
// `traces` when given. Throws DegenerateImage or NonFiniteLoss.
FlowField optimize_cascade(const Volume3 &fixed, const Volume3 &current_moving, const CascadeConfig &cfg,
                           std::vector<LevelTrace> *traces = nullptr, std::size_t cascade_index = 0);

RegReport register_images(const Volume3 &fixed, const Volume3 &moving, const CascadeConfig &cfg,
                          const std::optional<Segmentations> &segs = std::nullopt);

}  // namespace flowstrain
