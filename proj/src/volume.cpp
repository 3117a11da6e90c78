#include "flowstrain/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowstrain/error.hpp"
#include "flowstrain/parallel.hpp"

namespace flowstrain {

namespace {

constexpr std::size_t kVoxelGrain = 2048;

void check_shape(const Shape3 &s) {
    if (s.d == 0 || s.h == 0 || s.w == 0) throw InvalidParameter("grid dimensions must be >= 1");
}

bool finite_all(const std::vector<double> &v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string shape_str(const Shape3 &s) {
    return "(" + std::to_string(s.d) + "," + std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

// Lower corner and fractional weight along one axis for clamp-to-edge sampling.
struct AxisCell {
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    double t = 0.0;
    bool inside = true;  // derivative is non-zero only inside [0, dim-1]
};

AxisCell clamp_cell(double p, std::size_t dim) {
    AxisCell c;
    if (dim == 1) {
        c.inside = false;
        return c;
    }
    const double hi = static_cast<double>(dim - 1);
    c.inside = (p >= 0.0 && p <= hi);
    const double q = std::clamp(p, 0.0, hi);
    auto i0 = static_cast<std::size_t>(std::floor(q));
    if (i0 > dim - 2) i0 = dim - 2;
    c.i0 = i0;
    c.i1 = i0 + 1;
    c.t = q - static_cast<double>(i0);
    return c;
}

void require_finite(Point3 p) {
    if (!std::isfinite(p.z) || !std::isfinite(p.y) || !std::isfinite(p.x)) {
        throw InvalidCoordinate("non-finite sample position");
    }
}

SampleGradient sample_clamp(const Volume3 &vol, Point3 p, bool want_grad) {
    const Shape3 &s = vol.shape();
    const AxisCell cz = clamp_cell(p.z, s.d);
    const AxisCell cy = clamp_cell(p.y, s.h);
    const AxisCell cx = clamp_cell(p.x, s.w);

    const double v000 = vol.at(cz.i0, cy.i0, cx.i0), v001 = vol.at(cz.i0, cy.i0, cx.i1);
    const double v010 = vol.at(cz.i0, cy.i1, cx.i0), v011 = vol.at(cz.i0, cy.i1, cx.i1);
    const double v100 = vol.at(cz.i1, cy.i0, cx.i0), v101 = vol.at(cz.i1, cy.i0, cx.i1);
    const double v110 = vol.at(cz.i1, cy.i1, cx.i0), v111 = vol.at(cz.i1, cy.i1, cx.i1);

    const double wz1 = cz.t, wz0 = 1.0 - cz.t;
    const double wy1 = cy.t, wy0 = 1.0 - cy.t;
    const double wx1 = cx.t, wx0 = 1.0 - cx.t;

    // Weighted form keeps integer lattice samples exact.
    const double a00 = wx0 * v000 + wx1 * v001;
    const double a01 = wx0 * v010 + wx1 * v011;
    const double a10 = wx0 * v100 + wx1 * v101;
    const double a11 = wx0 * v110 + wx1 * v111;
    const double b0 = wy0 * a00 + wy1 * a01;
    const double b1 = wy0 * a10 + wy1 * a11;

    SampleGradient out;
    out.value = wz0 * b0 + wz1 * b1;
    if (!want_grad) return out;

    if (cz.inside) out.dz = b1 - b0;
    if (cy.inside) out.dy = wz0 * (a01 - a00) + wz1 * (a11 - a10);
    if (cx.inside) {
        const double d00 = v001 - v000, d01 = v011 - v010, d10 = v101 - v100, d11 = v111 - v110;
        out.dx = wz0 * (wy0 * d00 + wy1 * d01) + wz1 * (wy0 * d10 + wy1 * d11);
    }
    return out;
}

SampleGradient sample_zero(const Volume3 &vol, Point3 p, bool want_grad) {
    const Shape3 &s = vol.shape();
    const double fz = std::floor(p.z), fy = std::floor(p.y), fx = std::floor(p.x);
    const double tz = p.z - fz, ty = p.y - fy, tx = p.x - fx;
    auto fetch = [&](double z, double y, double x) -> double {
        if (z < 0 || y < 0 || x < 0) return 0.0;
        if (z >= static_cast<double>(s.d) || y >= static_cast<double>(s.h) || x >= static_cast<double>(s.w)) return 0.0;
        return vol.at(static_cast<std::size_t>(z), static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    };
    const double v000 = fetch(fz, fy, fx), v001 = fetch(fz, fy, fx + 1);
    const double v010 = fetch(fz, fy + 1, fx), v011 = fetch(fz, fy + 1, fx + 1);
    const double v100 = fetch(fz + 1, fy, fx), v101 = fetch(fz + 1, fy, fx + 1);
    const double v110 = fetch(fz + 1, fy + 1, fx), v111 = fetch(fz + 1, fy + 1, fx + 1);

    const double a00 = (1 - tx) * v000 + tx * v001;
    const double a01 = (1 - tx) * v010 + tx * v011;
    const double a10 = (1 - tx) * v100 + tx * v101;
    const double a11 = (1 - tx) * v110 + tx * v111;
    const double b0 = (1 - ty) * a00 + ty * a01;
    const double b1 = (1 - ty) * a10 + ty * a11;

    SampleGradient out;
    out.value = (1 - tz) * b0 + tz * b1;
    if (!want_grad) return out;
    out.dz = b1 - b0;
    out.dy = (1 - tz) * (a01 - a00) + tz * (a11 - a10);
    out.dx = (1 - tz) * ((1 - ty) * (v001 - v000) + ty * (v011 - v010)) +
             tz * ((1 - ty) * (v101 - v100) + ty * (v111 - v110));
    return out;
}

}  // namespace

void require_same_shape(const Shape3 &a, const Shape3 &b, const char *what) {
    if (!(a == b)) {
        throw ShapeMismatch(std::string(what) + ": shapes differ " + shape_str(a) + " vs " + shape_str(b));
    }
}

// ---------------------------------------------------------------------------
Volume3::Volume3(Shape3 shape, Spacing3 spacing, double fill) : shape_(shape), spacing_(spacing) {
    check_shape(shape_);
    if (!std::isfinite(fill)) throw InvalidParameter("non-finite fill value");
    data_.assign(shape_.voxels(), fill);
}

Volume3::Volume3(Shape3 shape, Spacing3 spacing, std::vector<double> data)
    : shape_(shape), spacing_(spacing), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_.voxels()) throw InvalidParameter("volume data length does not match its shape");
    if (!finite_all(data_)) throw InvalidParameter("volume contains non-finite samples");
}

FlowField::FlowField(Shape3 shape, Spacing3 spacing) : shape_(shape), spacing_(spacing) {
    check_shape(shape_);
    data_.assign(3 * shape_.voxels(), 0.0);
}

FlowField::FlowField(Shape3 shape, Spacing3 spacing, std::vector<double> data)
    : shape_(shape), spacing_(spacing), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != 3 * shape_.voxels()) throw InvalidParameter("flow data length does not match its shape");
    if (!finite_all(data_)) throw InvalidParameter("flow contains non-finite samples");
}

bool FlowField::all_finite() const { return finite_all(data_); }

LabelVolume::LabelVolume(Shape3 shape, Label fill) : shape_(shape) {
    check_shape(shape_);
    if (fill < 0) throw InvalidParameter("labels must be non-negative");
    labels_.assign(shape_.voxels(), fill);
}

LabelVolume::LabelVolume(Shape3 shape, std::vector<Label> labels) : shape_(shape), labels_(std::move(labels)) {
    check_shape(shape_);
    if (labels_.size() != shape_.voxels()) throw InvalidParameter("label data length does not match its shape");
    if (std::any_of(labels_.begin(), labels_.end(), [](Label l) { return l < 0; })) {
        throw InvalidParameter("labels must be non-negative");
    }
}

// ---------------------------------------------------------------------------
double trilinear_sample(const Volume3 &vol, Point3 p, Boundary boundary) {
    require_finite(p);
    return boundary == Boundary::Clamp ? sample_clamp(vol, p, false).value : sample_zero(vol, p, false).value;
}

SampleGradient trilinear_sample_gradient(const Volume3 &vol, Point3 p, Boundary boundary) {
    require_finite(p);
    return boundary == Boundary::Clamp ? sample_clamp(vol, p, true) : sample_zero(vol, p, true);
}

Volume3 warp_image(const Volume3 &moving, const FlowField &flow, Boundary boundary) {
    require_same_shape(moving.shape(), flow.shape(), "warp_image");
    if (!flow.all_finite()) throw InvalidCoordinate("flow field contains non-finite displacements");
    const Shape3 s = moving.shape();
    Volume3 out(s, moving.spacing());
    parallel::for_chunks(s.voxels(), kVoxelGrain, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const std::size_t x = i % s.w, y = (i / s.w) % s.h, z = i / (s.w * s.h);
            const Point3 p{static_cast<double>(z) + flow.at(i, 2), static_cast<double>(y) + flow.at(i, 1),
                           static_cast<double>(x) + flow.at(i, 0)};
            out[i] = boundary == Boundary::Clamp ? sample_clamp(moving, p, false).value
                                                 : sample_zero(moving, p, false).value;
        }
    });
    return out;
}

LabelVolume warp_labels(const LabelVolume &seg, const FlowField &flow) {
    require_same_shape(seg.shape(), flow.shape(), "warp_labels");
    if (!flow.all_finite()) throw InvalidCoordinate("flow field contains non-finite displacements");
    const Shape3 s = seg.shape();
    LabelVolume out(s);
    auto nearest = [](double p, std::size_t dim) {
        const double r = std::clamp(std::round(p), 0.0, static_cast<double>(dim - 1));
        return static_cast<std::size_t>(r);
    };
    parallel::for_chunks(s.voxels(), kVoxelGrain, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const std::size_t x = i % s.w, y = (i / s.w) % s.h, z = i / (s.w * s.h);
            const std::size_t zz = nearest(static_cast<double>(z) + flow.at(i, 2), s.d);
            const std::size_t yy = nearest(static_cast<double>(y) + flow.at(i, 1), s.h);
            const std::size_t xx = nearest(static_cast<double>(x) + flow.at(i, 0), s.w);
            out[i] = seg.at(zz, yy, xx);
        }
    });
    return out;
}

}  // namespace flowstrain
