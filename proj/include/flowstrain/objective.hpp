// objective.hpp - similarity metrics, flow regularizers, the weighted
// registration loss with its analytic gradient, and evaluation statistics.
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "flowstrain/volume.hpp"

namespace flowstrain {

inline constexpr double kCorrcoefVarianceGuard = 1e-10;
inline constexpr double kLocalNccGuard = 1e-5;

struct LossWeights {
    double corrcoef = 1.0;
    double tv = 0.5;

    // Throws InvalidParameter when negative, non-finite, or both zero.
    void validate() const;
};

struct LossBreakdown {
    double corrcoef_loss = 0.0;
    double tv_loss = 0.0;
    double total = 0.0;
};

// Population covariance over the grid.
double covariance(const Volume3 &a, const Volume3 &b);

// Pearson correlation in [-1, 1]. Throws DegenerateImage when either variance is <= 1e-10.
double corrcoef(const Volume3 &warped, const Volume3 &fixed);
double corrcoef_loss(const Volume3 &warped, const Volume3 &fixed);

// Sum over voxels of the squared local normalized cross-correlation in n^3
// windows clipped to the grid. Larger is more similar; the matching loss is
// its negation. Throws InvalidParameter for an even or < 3 window.
double local_ncc(const Volume3 &fixed, const Volume3 &warped, std::size_t window = 9);

// Mean squared forward difference of the flow over all in-grid neighbour
// pairs, normalised by 3|grid|.
double tv_loss(const FlowField &flow);

// Mean over voxels of the squared Frobenius norm of the forward-difference Jacobian.
double smoothness_loss(const FlowField &flow);

struct LossGradient {
    LossBreakdown loss;
    FlowField gradient;  // d total / d flow, same layout as the flow
};

// Weighted corrcoef + TV loss of warp_image(moving, flow) against `fixed`, and
// its exact gradient through the trilinear warp.
LossGradient total_loss_and_grad(const Volume3 &fixed, const Volume3 &moving, const FlowField &flow,
                                 const LossWeights &weights, Boundary boundary = Boundary::Clamp);

// Loss only; same arithmetic as total_loss_and_grad.
LossBreakdown total_loss(const Volume3 &fixed, const Volume3 &moving, const FlowField &flow,
                         const LossWeights &weights, Boundary boundary = Boundary::Clamp);

// 2|X n Y| / (|X| + |Y|) over voxels carrying `label`; 1 when both are empty.
double dice(const LabelVolume &a, const LabelVolume &b, LabelVolume::Label label);

struct AgreementStats {
    double mean_diff = 0.0;
    double sd_diff = 0.0;  // sample standard deviation (n - 1)
    double loa_low = 0.0;
    double loa_high = 0.0;
    std::size_t n = 0;
};

enum class DifferenceMode { Absolute, Signed };

// Statistics of precomputed differences. Throws InsufficientData for n < 2.
AgreementStats agreement_stats(std::span<const double> differences);

// Differences test - retest (or their absolute value) then agreement_stats.
AgreementStats bland_altman(std::span<const std::pair<double, double>> pairs,
                            DifferenceMode mode = DifferenceMode::Absolute);

}  // namespace flowstrain
