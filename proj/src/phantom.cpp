#include "flowstrain/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "flowstrain/error.hpp"

namespace flowstrain {

namespace {

void blur_axis(std::vector<double> &v, const Shape3 &s, int axis, const std::vector<double> &kernel) {
    const std::size_t len = axis == 0 ? s.w : axis == 1 ? s.h : s.d;
    if (len == 1) return;
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? s.w : s.w * s.h;
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    std::vector<double> line(len);
    for (std::size_t z = 0; z < s.d; ++z)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                // Visit each line once, from its first element.
                if ((axis == 0 && x != 0) || (axis == 1 && y != 0) || (axis == 2 && z != 0)) continue;
                const std::size_t base = s.index(z, y, x);
                for (std::size_t k = 0; k < len; ++k) line[k] = v[base + k * stride];
                for (std::size_t k = 0; k < len; ++k) {
                    double acc = 0.0;
                    for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                        const auto j = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k) + t, 0,
                                                                  static_cast<std::ptrdiff_t>(len) - 1);
                        acc += kernel[static_cast<std::size_t>(t + radius)] * line[static_cast<std::size_t>(j)];
                    }
                    v[base + k * stride] = acc;
                }
            }
}

// Box-Muller over a 64-bit Mersenne Twister; identical streams on every platform.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}
    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;          // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace

AxisCenter default_center(const Shape3 &shape) {
    return {(static_cast<double>(shape.h) - 1.0) / 2.0, (static_cast<double>(shape.w) - 1.0) / 2.0};
}

void PhantomParams::validate() const {
    if (shape.d == 0 || shape.h == 0 || shape.w == 0) throw InvalidParameter("phantom shape must be >= 1 per axis");
    const double half = static_cast<double>(std::min(shape.h, shape.w)) / 2.0;
    if (!(inner_radius > 0.0 && inner_radius < outer_radius && outer_radius < half)) {
        throw InvalidParameter("phantom radii must satisfy 0 < r_i < r_o < min(H,W)/2");
    }
    if (!(sigma >= 0.0) || !(noise_sd >= 0.0)) throw InvalidParameter("phantom sigma and noise must be >= 0");
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha <= -1.0 || beta <= -1.0) {
        throw InvalidParameter("phantom alpha and beta must be finite and > -1");
    }
    const AxisCenter c = resolved_center();
    if (c.x < 0.0 || c.y < 0.0 || c.x > static_cast<double>(shape.w - 1) || c.y > static_cast<double>(shape.h - 1)) {
        throw InvalidParameter("phantom center lies outside the grid");
    }
}

Volume3 gaussian_smooth(const Volume3 &vol, double sigma) {
    if (sigma < 0.0) throw InvalidParameter("smoothing sigma must be >= 0");
    if (sigma == 0.0) return vol;
    const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (std::size_t k = 0; k < kernel.size(); ++k) {
        const double t = static_cast<double>(k) - static_cast<double>(radius);
        kernel[k] = std::exp(-0.5 * t * t / (sigma * sigma));
        total += kernel[k];
    }
    for (double &k : kernel) k /= total;

    Volume3 out = vol;
    blur_axis(out.data(), vol.shape(), 0, kernel);
    blur_axis(out.data(), vol.shape(), 1, kernel);
    blur_axis(out.data(), vol.shape(), 2, kernel);
    return out;
}

Annulus make_annulus(const PhantomParams &params) {
    params.validate();
    const Shape3 s = params.shape;
    const AxisCenter c = params.resolved_center();
    Annulus a{Volume3(s), LabelVolume(s)};
    for (std::size_t z = 0; z < s.d; ++z)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                const double dx = static_cast<double>(x) - c.x, dy = static_cast<double>(y) - c.y;
                const double r = std::sqrt(dx * dx + dy * dy);
                LabelVolume::Label label = 0;
                double value = params.background;
                if (r < params.inner_radius) {
                    label = kBloodPoolLabel;
                    value = params.blood_pool;
                } else if (r <= params.outer_radius) {
                    label = kMyocardiumLabel;
                    value = params.myocardium;
                }
                a.labels.at(z, y, x) = label;
                a.image.at(z, y, x) = value;
            }
    a.image = gaussian_smooth(a.image, params.sigma);
    return a;
}

FlowField make_affine_flow(const Shape3 &shape, AxisCenter center, double alpha, double beta) {
    FlowField flow(shape);
    const double cz = (static_cast<double>(shape.d) - 1.0) / 2.0;
    for (std::size_t z = 0; z < shape.d; ++z)
        for (std::size_t y = 0; y < shape.h; ++y)
            for (std::size_t x = 0; x < shape.w; ++x) {
                const std::size_t i = shape.index(z, y, x);
                flow.at(i, 0) = alpha * (static_cast<double>(x) - center.x);
                flow.at(i, 1) = alpha * (static_cast<double>(y) - center.y);
                flow.at(i, 2) = beta * (static_cast<double>(z) - cz);
            }
    return flow;
}

PhantomPair generate_pair(const PhantomParams &params) {
    params.validate();
    const AxisCenter c = params.resolved_center();
    const Shape3 s = params.shape;

    // The fixed annulus is the moving one scaled by 1/(1+alpha) about the axis.
    const double margin = std::min({c.x, c.y, static_cast<double>(s.w - 1) - c.x, static_cast<double>(s.h - 1) - c.y});
    const double reach = params.outer_radius * std::max(1.0, 1.0 / (1.0 + params.alpha)) + 3.0 * params.sigma + 1.0;
    if (reach > margin) {
        throw InvalidParameter("annulus (reach " + std::to_string(reach) + " voxels) does not fit in the grid (margin " +
                               std::to_string(margin) + ")");
    }

    const Annulus a = make_annulus(params);
    PhantomPair pair;
    pair.true_flow = make_affine_flow(s, c, params.alpha, params.beta);
    pair.moving = a.image;
    pair.seg_moving = a.labels;
    pair.fixed = warp_image(pair.moving, pair.true_flow);
    pair.seg_fixed = warp_labels(pair.seg_moving, pair.true_flow);

    if (params.noise_sd > 0.0) {
        NormalStream noise(params.seed);
        for (double &v : pair.fixed.data()) v += params.noise_sd * noise.next();
        for (double &v : pair.moving.data()) v += params.noise_sd * noise.next();
    }
    return pair;
}

}  // namespace flowstrain
