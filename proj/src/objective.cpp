#include "flowstrain/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowstrain/error.hpp"
#include "flowstrain/parallel.hpp"

namespace flowstrain {

namespace {

constexpr std::size_t kVoxelGrain = 2048;

struct Moments {
    double mean_w = 0.0;
    double mean_f = 0.0;
    double cov_wf = 0.0;
    double var_w = 0.0;
    double var_f = 0.0;
};

Moments moments(const std::vector<double> &w, const std::vector<double> &f) {
    const std::size_t n = w.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    Moments m;
    m.mean_w = parallel::deterministic_sum(n, [&](std::size_t i) { return w[i]; }) * inv_n;
    m.mean_f = parallel::deterministic_sum(n, [&](std::size_t i) { return f[i]; }) * inv_n;
    m.cov_wf = parallel::deterministic_sum(n, [&](std::size_t i) { return (w[i] - m.mean_w) * (f[i] - m.mean_f); }) * inv_n;
    m.var_w = parallel::deterministic_sum(n, [&](std::size_t i) { return (w[i] - m.mean_w) * (w[i] - m.mean_w); }) * inv_n;
    m.var_f = parallel::deterministic_sum(n, [&](std::size_t i) { return (f[i] - m.mean_f) * (f[i] - m.mean_f); }) * inv_n;
    return m;
}

double correlation_from(const Moments &m) {
    if (m.var_w <= kCorrcoefVarianceGuard || m.var_f <= kCorrcoefVarianceGuard) {
        throw DegenerateImage("correlation undefined: image variance below " + std::to_string(kCorrcoefVarianceGuard));
    }
    return std::clamp(m.cov_wf / std::sqrt(m.var_w * m.var_f), -1.0, 1.0);
}

// Squared forward differences of the flow summed over all in-grid pairs.
double sum_forward_sq_diffs(const FlowField &flow) {
    const Shape3 s = flow.shape();
    return parallel::deterministic_sum(s.voxels(), [&](std::size_t i) {
        const std::size_t x = i % s.w, y = (i / s.w) % s.h, z = i / (s.w * s.h);
        double acc = 0.0;
        auto add = [&](std::size_t j) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double d = flow.at(j, c) - flow.at(i, c);
                acc += d * d;
            }
        };
        if (x + 1 < s.w) add(i + 1);
        if (y + 1 < s.h) add(i + s.w);
        if (z + 1 < s.d) add(i + s.w * s.h);
        return acc;
    });
}

// Clipped box sums along one axis, in place. `stride` is the element step along the axis.
void box_axis(std::vector<double> &v, const Shape3 &s, int axis, std::size_t radius) {
    const std::size_t len = axis == 0 ? s.w : axis == 1 ? s.h : s.d;
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? s.w : s.w * s.h;
    const std::size_t lines = s.voxels() / len;
    parallel::for_chunks(lines, 64, [&](std::size_t b, std::size_t e) {
        std::vector<double> prefix(len + 1);
        for (std::size_t line = b; line < e; ++line) {
            std::size_t base = 0;
            if (axis == 0) {
                base = line * s.w;
            } else if (axis == 1) {
                base = (line / s.w) * s.w * s.h + line % s.w;
            } else {
                base = line;
            }
            prefix[0] = 0.0;
            for (std::size_t k = 0; k < len; ++k) prefix[k + 1] = prefix[k] + v[base + k * stride];
            for (std::size_t k = 0; k < len; ++k) {
                const std::size_t lo = k >= radius ? k - radius : 0;
                const std::size_t hi = std::min(len - 1, k + radius);
                v[base + k * stride] = prefix[hi + 1] - prefix[lo];
            }
        }
    });
}

std::vector<double> box_sum(std::vector<double> v, const Shape3 &s, std::size_t radius) {
    box_axis(v, s, 0, radius);
    box_axis(v, s, 1, radius);
    box_axis(v, s, 2, radius);
    return v;
}

std::size_t clipped_count(std::size_t k, std::size_t len, std::size_t radius) {
    const std::size_t lo = k >= radius ? k - radius : 0;
    const std::size_t hi = std::min(len - 1, k + radius);
    return hi - lo + 1;
}

}  // namespace

void LossWeights::validate() const {
    if (!std::isfinite(corrcoef) || !std::isfinite(tv) || corrcoef < 0.0 || tv < 0.0) {
        throw InvalidParameter("loss weights must be finite and non-negative");
    }
    if (corrcoef == 0.0 && tv == 0.0) throw InvalidParameter("loss weights must not both be zero");
}

double covariance(const Volume3 &a, const Volume3 &b) {
    require_same_shape(a.shape(), b.shape(), "covariance");
    return moments(a.data(), b.data()).cov_wf;
}

double corrcoef(const Volume3 &warped, const Volume3 &fixed) {
    require_same_shape(warped.shape(), fixed.shape(), "corrcoef");
    return correlation_from(moments(warped.data(), fixed.data()));
}

double corrcoef_loss(const Volume3 &warped, const Volume3 &fixed) { return 1.0 - corrcoef(warped, fixed); }

double local_ncc(const Volume3 &fixed, const Volume3 &warped, std::size_t window) {
    require_same_shape(fixed.shape(), warped.shape(), "local_ncc");
    if (window < 3 || window % 2 == 0) {
        throw InvalidParameter("local_ncc window must be odd and >= 3, got " + std::to_string(window));
    }
    const Shape3 s = fixed.shape();
    const std::size_t n = s.voxels();
    const std::size_t r = window / 2;
    const auto &I = fixed.data();
    const auto &J = warped.data();

    std::vector<double> i2(n), j2(n), ij(n);
    for (std::size_t k = 0; k < n; ++k) {
        i2[k] = I[k] * I[k];
        j2[k] = J[k] * J[k];
        ij[k] = I[k] * J[k];
    }
    const auto sI = box_sum(I, s, r);
    const auto sJ = box_sum(J, s, r);
    const auto sI2 = box_sum(std::move(i2), s, r);
    const auto sJ2 = box_sum(std::move(j2), s, r);
    const auto sIJ = box_sum(std::move(ij), s, r);

    return parallel::deterministic_sum(n, [&](std::size_t k) {
        const std::size_t x = k % s.w, y = (k / s.w) % s.h, z = k / (s.w * s.h);
        const double count = static_cast<double>(clipped_count(x, s.w, r) * clipped_count(y, s.h, r) *
                                                 clipped_count(z, s.d, r));
        const double cross = sIJ[k] - sI[k] * sJ[k] / count;
        const double var_i = std::max(0.0, sI2[k] - sI[k] * sI[k] / count);
        const double var_j = std::max(0.0, sJ2[k] - sJ[k] * sJ[k] / count);
        if (var_i == 0.0 || var_j == 0.0) return 0.0;
        return cross * cross / (var_i * var_j + kLocalNccGuard);
    });
}

double tv_loss(const FlowField &flow) {
    return sum_forward_sq_diffs(flow) / (3.0 * static_cast<double>(flow.voxels()));
}

double smoothness_loss(const FlowField &flow) {
    return sum_forward_sq_diffs(flow) / static_cast<double>(flow.voxels());
}

LossBreakdown total_loss(const Volume3 &fixed, const Volume3 &moving, const FlowField &flow,
                         const LossWeights &weights, Boundary boundary) {
    weights.validate();
    require_same_shape(fixed.shape(), moving.shape(), "total_loss");
    const Volume3 warped = warp_image(moving, flow, boundary);
    LossBreakdown out;
    out.corrcoef_loss = 1.0 - correlation_from(moments(warped.data(), fixed.data()));
    out.tv_loss = tv_loss(flow);
    out.total = weights.corrcoef * out.corrcoef_loss + weights.tv * out.tv_loss;
    return out;
}

LossGradient total_loss_and_grad(const Volume3 &fixed, const Volume3 &moving, const FlowField &flow,
                                 const LossWeights &weights, Boundary boundary) {
    weights.validate();
    require_same_shape(fixed.shape(), moving.shape(), "total_loss_and_grad");
    require_same_shape(fixed.shape(), flow.shape(), "total_loss_and_grad");
    if (!flow.all_finite()) throw InvalidCoordinate("flow field contains non-finite displacements");

    const Shape3 s = fixed.shape();
    const std::size_t n = s.voxels();

    // Warp and keep the interpolant's spatial derivative at each sample point.
    std::vector<double> warped(n);
    std::vector<double> dwdx(n), dwdy(n), dwdz(n);
    parallel::for_chunks(n, kVoxelGrain, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const std::size_t x = i % s.w, y = (i / s.w) % s.h, z = i / (s.w * s.h);
            const Point3 p{static_cast<double>(z) + flow.at(i, 2), static_cast<double>(y) + flow.at(i, 1),
                           static_cast<double>(x) + flow.at(i, 0)};
            const SampleGradient g = trilinear_sample_gradient(moving, p, boundary);
            warped[i] = g.value;
            dwdx[i] = g.dx;
            dwdy[i] = g.dy;
            dwdz[i] = g.dz;
        }
    });

    const auto &f = fixed.data();
    const Moments m = moments(warped, f);
    const double r = correlation_from(m);

    LossGradient out;
    out.loss.corrcoef_loss = 1.0 - r;
    out.loss.tv_loss = tv_loss(flow);
    out.loss.total = weights.corrcoef * out.loss.corrcoef_loss + weights.tv * out.loss.tv_loss;

    // d(1 - r)/dW_i = -(1/n) [ (F_i - mean F) / sqrt(var_w var_f) - r (W_i - mean W) / var_w ]
    const double inv_n = 1.0 / static_cast<double>(n);
    const double inv_sd = 1.0 / std::sqrt(m.var_w * m.var_f);
    const double r_over_var = r / m.var_w;
    const double tv_scale = 2.0 / (3.0 * static_cast<double>(n));

    out.gradient = FlowField(s, flow.spacing());
    parallel::for_chunks(n, kVoxelGrain, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const double dl_dw = -inv_n * ((f[i] - m.mean_f) * inv_sd - r_over_var * (warped[i] - m.mean_w));
            const double cc = weights.corrcoef * dl_dw;
            double g[3] = {cc * dwdx[i], cc * dwdy[i], cc * dwdz[i]};

            if (weights.tv != 0.0) {
                const std::size_t x = i % s.w, y = (i / s.w) % s.h, z = i / (s.w * s.h);
                const std::size_t steps[3] = {1, s.w, s.w * s.h};
                const bool has_prev[3] = {x > 0, y > 0, z > 0};
                const bool has_next[3] = {x + 1 < s.w, y + 1 < s.h, z + 1 < s.d};
                for (std::size_t c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int a = 0; a < 3; ++a) {
                        if (has_prev[a]) acc += flow.at(i, c) - flow.at(i - steps[a], c);
                        if (has_next[a]) acc -= flow.at(i + steps[a], c) - flow.at(i, c);
                    }
                    g[c] += weights.tv * tv_scale * acc;
                }
            }
            out.gradient.at(i, 0) = g[0];
            out.gradient.at(i, 1) = g[1];
            out.gradient.at(i, 2) = g[2];
        }
    });
    return out;
}

double dice(const LabelVolume &a, const LabelVolume &b, LabelVolume::Label label) {
    require_same_shape(a.shape(), b.shape(), "dice");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool in_a = a[i] == label, in_b = b[i] == label;
        na += in_a;
        nb += in_b;
        both += in_a && in_b;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

AgreementStats agreement_stats(std::span<const double> d) {
    if (d.size() < 2) throw InsufficientData("agreement statistics need at least 2 pairs, got " + std::to_string(d.size()));
    AgreementStats st;
    st.n = d.size();
    double sum = 0.0;
    for (double v : d) sum += v;
    st.mean_diff = sum / static_cast<double>(st.n);
    double ss = 0.0;
    for (double v : d) ss += (v - st.mean_diff) * (v - st.mean_diff);
    st.sd_diff = std::sqrt(ss / static_cast<double>(st.n - 1));
    const double half_width = 1.96 * st.sd_diff;
    st.loa_low = st.mean_diff - half_width;
    st.loa_high = st.mean_diff + half_width;
    return st;
}

AgreementStats bland_altman(std::span<const std::pair<double, double>> pairs, DifferenceMode mode) {
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const auto &[test, retest] : pairs) {
        const double diff = test - retest;
        d.push_back(mode == DifferenceMode::Absolute ? std::fabs(diff) : diff);
    }
    return agreement_stats(d);
}

}  // namespace flowstrain
