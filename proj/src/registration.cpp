#include "flowstrain/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <string>

#include "flowstrain/error.hpp"
#include "flowstrain/parallel.hpp"
#include "flowstrain/rvf.hpp"

namespace flowstrain {

namespace {

constexpr std::size_t kVoxelGrain = 2048;

std::size_t half_extent(std::size_t n) { return n == 1 ? 1 : (n + 1) / 2; }

// Step-scale factors of the loss safeguard: a rejected update is retried at
// half the scale, an accepted one lets the scale recover towards 1.
constexpr double kRejectShrink = 0.5;
constexpr double kAcceptGrow = 1.2;

// Adaptive-moment state for one pyramid level.
class AdamState {
  public:
    AdamState(std::size_t n, const CascadeConfig &cfg) : m_(n, 0.0), v_(n, 0.0), dir_(n, 0.0), cfg_(cfg) {}

    // Folds `grad` into the moments and moves along the new direction.
    void step(std::vector<double> &params, const std::vector<double> &grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        parallel::for_chunks(params.size(), 3 * kVoxelGrain, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
                v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
                dir_[i] = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
            }
        });
        move(params);
    }

    // Moves along the last direction again, after the caller restored the parameters.
    void retry(std::vector<double> &params) { move(params); }

    void accept() { scale_ = std::min(1.0, scale_ * kAcceptGrow); }
    void reject() { scale_ *= kRejectShrink; }

  private:
    void move(std::vector<double> &params) const {
        const double lr = cfg_.step * scale_;
        parallel::for_chunks(params.size(), 3 * kVoxelGrain, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) params[i] -= lr * dir_[i];
        });
    }

    std::vector<double> m_;
    std::vector<double> v_;
    std::vector<double> dir_;
    const CascadeConfig &cfg_;
    std::size_t t_ = 0;
    double scale_ = 1.0;
};

void check_finite(const LossBreakdown &l, std::size_t cascade, std::size_t level, std::size_t iter) {
    if (!std::isfinite(l.total)) {
        throw NonFiniteLoss("non-finite loss at cascade " + std::to_string(cascade + 1) + ", level " +
                            std::to_string(level) + ", iteration " + std::to_string(iter) +
                            " (corrcoef " + std::to_string(l.corrcoef_loss) + ", tv " + std::to_string(l.tv_loss) + ")");
    }
}

std::vector<LabelVolume::Label> labels_present(const LabelVolume &a) {
    std::set<LabelVolume::Label> s(a.labels().begin(), a.labels().end());
    s.erase(0);
    return {s.begin(), s.end()};
}

}  // namespace

void CascadeConfig::validate() const {
    if (num_cascades < 1 || iterations < 1 || pyramid_levels < 1) {
        throw InvalidParameter("cascade, iteration and pyramid counts must be >= 1");
    }
    if (!(step > 0.0) || !std::isfinite(step)) throw InvalidParameter("step size must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        throw InvalidParameter("adaptive-moment parameters out of range");
    }
    weights.validate();
}

FlowField compose_flows(const FlowField &inner, const FlowField &outer) {
    require_same_shape(inner.shape(), outer.shape(), "compose_flows");
    const Shape3 s = inner.shape();
    FlowField out(s, inner.spacing());

    // Component planes of `outer` so each can be sampled as a scalar volume.
    std::vector<Volume3> planes;
    for (std::size_t c = 0; c < 3; ++c) {
        Volume3 plane(s, outer.spacing());
        for (std::size_t i = 0; i < s.voxels(); ++i) plane[i] = outer.at(i, c);
        planes.push_back(std::move(plane));
    }
    parallel::for_chunks(s.voxels(), kVoxelGrain, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const std::size_t x = i % s.w, y = (i / s.w) % s.h, z = i / (s.w * s.h);
            const Point3 p{static_cast<double>(z) + inner.at(i, 2), static_cast<double>(y) + inner.at(i, 1),
                           static_cast<double>(x) + inner.at(i, 0)};
            for (std::size_t c = 0; c < 3; ++c) out.at(i, c) = inner.at(i, c) + trilinear_sample(planes[c], p);
        }
    });
    return out;
}

Volume3 downsample2(const Volume3 &vol) {
    const Shape3 s = vol.shape();
    const Shape3 o{half_extent(s.d), half_extent(s.h), half_extent(s.w)};
    const std::size_t fz = o.d == s.d ? 1 : 2, fy = o.h == s.h ? 1 : 2, fx = o.w == s.w ? 1 : 2;
    Volume3 out(o, {vol.spacing().z * static_cast<double>(fz), vol.spacing().y * static_cast<double>(fy),
                    vol.spacing().x * static_cast<double>(fx)});
    for (std::size_t z = 0; z < o.d; ++z)
        for (std::size_t y = 0; y < o.h; ++y)
            for (std::size_t x = 0; x < o.w; ++x) {
                double acc = 0.0;
                std::size_t count = 0;
                for (std::size_t dz = 0; dz < fz; ++dz)
                    for (std::size_t dy = 0; dy < fy; ++dy)
                        for (std::size_t dx = 0; dx < fx; ++dx) {
                            const std::size_t zz = z * fz + dz, yy = y * fy + dy, xx = x * fx + dx;
                            if (zz < s.d && yy < s.h && xx < s.w) {
                                acc += vol.at(zz, yy, xx);
                                ++count;
                            }
                        }
                out.at(z, y, x) = acc / static_cast<double>(count);
            }
    return out;
}

FlowField upsample_flow2(const FlowField &coarse, const Shape3 &fine) {
    const Shape3 c = coarse.shape();
    const double rz = static_cast<double>(fine.d == c.d ? 1 : 2);
    const double ry = static_cast<double>(fine.h == c.h ? 1 : 2);
    const double rx = static_cast<double>(fine.w == c.w ? 1 : 2);
    if (half_extent(fine.d) != c.d && fine.d != c.d) throw ShapeMismatch("upsample_flow2: incompatible depth");
    if (half_extent(fine.h) != c.h && fine.h != c.h) throw ShapeMismatch("upsample_flow2: incompatible height");
    if (half_extent(fine.w) != c.w && fine.w != c.w) throw ShapeMismatch("upsample_flow2: incompatible width");

    std::vector<Volume3> planes;
    for (std::size_t ch = 0; ch < 3; ++ch) {
        Volume3 plane(c);
        for (std::size_t i = 0; i < c.voxels(); ++i) plane[i] = coarse.at(i, ch);
        planes.push_back(std::move(plane));
    }
    const Spacing3 cs = coarse.spacing();
    FlowField out(fine, {cs.z / rz, cs.y / ry, cs.x / rx});
    const double scale[3] = {rx, ry, rz};
    parallel::for_chunks(fine.voxels(), kVoxelGrain, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const std::size_t x = i % fine.w, y = (i / fine.w) % fine.h, z = i / (fine.w * fine.h);
            // Cell-centred mapping of a fine voxel onto the coarse grid.
            const Point3 p{(static_cast<double>(z) + 0.5) / rz - 0.5, (static_cast<double>(y) + 0.5) / ry - 0.5,
                           (static_cast<double>(x) + 0.5) / rx - 0.5};
            for (std::size_t ch = 0; ch < 3; ++ch) out.at(i, ch) = scale[ch] * trilinear_sample(planes[ch], p);
        }
    });
    return out;
}

FlowField optimize_cascade(const Volume3 &fixed, const Volume3 &current_moving, const CascadeConfig &cfg,
                           std::vector<LevelTrace> *traces, std::size_t cascade_index) {
    cfg.validate();
    require_same_shape(fixed.shape(), current_moving.shape(), "optimize_cascade");

    // Level 0 is full resolution.
    std::vector<Volume3> fixed_pyr{fixed};
    std::vector<Volume3> moving_pyr{current_moving};
    for (std::size_t l = 1; l < cfg.pyramid_levels; ++l) {
        fixed_pyr.push_back(downsample2(fixed_pyr.back()));
        moving_pyr.push_back(downsample2(moving_pyr.back()));
    }

    FlowField flow;
    for (std::size_t l = cfg.pyramid_levels; l-- > 0;) {
        const Volume3 &f = fixed_pyr[l];
        const Volume3 &m = moving_pyr[l];
        flow = (l + 1 == cfg.pyramid_levels) ? FlowField(f.shape(), f.spacing()) : upsample_flow2(flow, f.shape());

        LevelTrace trace;
        trace.cascade = cascade_index;
        trace.level = l;
        trace.shape = f.shape();
        trace.trajectory.reserve(cfg.iterations + 1);

        // Each iteration evaluates one candidate update. Updates that raise the
        // loss are undone and retried with a smaller step, so the recorded
        // trajectory (the loss of the current iterate) never increases.
        AdamState adam(flow.data().size(), cfg);
        LossGradient current = total_loss_and_grad(f, m, flow, cfg.weights, cfg.boundary);
        check_finite(current.loss, cascade_index, l, 0);
        std::vector<double> accepted = flow.data();
        bool retry = false;
        for (std::size_t it = 0; it < cfg.iterations; ++it) {
            trace.trajectory.push_back(current.loss);
            if (retry) {
                adam.retry(flow.data());
            } else {
                adam.step(flow.data(), current.gradient.data());
            }
            LossGradient candidate = total_loss_and_grad(f, m, flow, cfg.weights, cfg.boundary);
            check_finite(candidate.loss, cascade_index, l, it + 1);
            if (candidate.loss.total <= current.loss.total) {
                current = std::move(candidate);
                accepted = flow.data();
                adam.accept();
                retry = false;
            } else {
                flow.data() = accepted;
                adam.reject();
                retry = true;
            }
        }
        trace.trajectory.push_back(current.loss);
        if (traces) traces->push_back(std::move(trace));
    }
    flow.set_spacing(fixed.spacing());
    return flow;
}

RegReport register_images(const Volume3 &fixed, const Volume3 &moving, const CascadeConfig &cfg,
                          const std::optional<Segmentations> &segs) {
    cfg.validate();
    require_same_shape(fixed.shape(), moving.shape(), "register");
    if (segs) {
        require_same_shape(fixed.shape(), segs->fixed.shape(), "register (fixed segmentation)");
        require_same_shape(fixed.shape(), segs->moving.shape(), "register (moving segmentation)");
    }
    const auto t0 = std::chrono::steady_clock::now();

    RegReport report;
    report.identity_loss = total_loss(fixed, moving, FlowField(fixed.shape(), fixed.spacing()), cfg.weights, cfg.boundary);

    FlowField composed(fixed.shape(), fixed.spacing());
    Volume3 current = moving;
    for (std::size_t k = 0; k < cfg.num_cascades; ++k) {
        const FlowField step = optimize_cascade(fixed, current, cfg, &report.traces, k);
        composed = compose_flows(step, composed);
        // Re-sample from the original image so blur does not compound across cascades.
        current = warp_image(moving, composed, cfg.boundary);
        report.cascade_corrcoef_loss.push_back(corrcoef_loss(current, fixed));
        report.total_iterations += cfg.iterations * cfg.pyramid_levels;
    }

    report.flow = quantize_f32(composed);
    report.final_loss = total_loss(fixed, moving, report.flow, cfg.weights, cfg.boundary);

    if (segs) {
        const auto labels = segs->labels.empty() ? labels_present(segs->fixed) : segs->labels;
        const LabelVolume warped = warp_labels(segs->moving, report.flow);
        for (auto label : labels) {
            report.dice.push_back({label, dice(segs->fixed, segs->moving, label), dice(segs->fixed, warped, label)});
        }
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace flowstrain
