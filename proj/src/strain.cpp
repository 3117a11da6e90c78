#include "flowstrain/strain.hpp"

#include <cmath>

#include "flowstrain/error.hpp"
#include "flowstrain/parallel.hpp"
#include "flowstrain/rvf.hpp"

namespace flowstrain {

namespace {

constexpr std::size_t kGrain = 2048;

template <class Fn>
void for_voxels(std::size_t n, Fn &&fn) {
    parallel::for_chunks(n, kGrain, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

// d/d(axis) of flow channel c at (z,y,x); central inside, one-sided at faces.
double axis_derivative(const FlowField &flow, std::size_t c, std::size_t z, std::size_t y, std::size_t x,
                       int axis) {
    const Shape3 &s = flow.shape();
    const std::size_t n = axis == 0 ? s.w : axis == 1 ? s.h : s.d;
    const std::size_t pos = axis == 0 ? x : axis == 1 ? y : z;
    if (n == 1) return 0.0;
    auto sample = [&](std::size_t p) {
        const std::size_t idx = axis == 0 ? s.index(z, y, p) : axis == 1 ? s.index(z, p, x) : s.index(p, y, x);
        return flow.at(idx, c);
    };
    if (pos == 0) return sample(1) - sample(0);
    if (pos == n - 1) return sample(n - 1) - sample(n - 2);
    return (sample(pos + 1) - sample(pos - 1)) / 2.0;
}

Tensor3 mul_transpose_left(const Tensor3 &a) {
    // a^T a
    Tensor3 out{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 3; ++k) acc += a[3 * k + i] * a[3 * k + j];
            out[3 * i + j] = acc;
        }
    return out;
}

}  // namespace

TensorField3::TensorField3(const Shape3 &shape, const Spacing3 &spacing)
    : shape_(shape), spacing_(spacing), data_(9 * shape.voxels(), 0.0), valid_(shape.voxels(), 1) {}

Tensor3 TensorField3::tensor(std::size_t voxel) const {
    Tensor3 t;
    for (std::size_t k = 0; k < 9; ++k) t[k] = data_[9 * voxel + k];
    return t;
}

void TensorField3::set_tensor(std::size_t voxel, const Tensor3 &t) {
    for (std::size_t k = 0; k < 9; ++k) data_[9 * voxel + k] = t[k];
}

void TensorField3::invalidate(std::size_t voxel) {
    valid_[voxel] = 0;
    for (std::size_t k = 0; k < 9; ++k) data_[9 * voxel + k] = 0.0;
}

std::size_t TensorField3::valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_) n += v;
    return n;
}

Volume3 TensorField3::component(std::size_t row, std::size_t col) const {
    if (row > 2 || col > 2) throw InvalidParameter("tensor component index out of range");
    Volume3 out(shape_, spacing_);
    for (std::size_t i = 0; i < voxels(); ++i) out[i] = valid(i) ? at(i, row, col) : 0.0;
    return out;
}

TensorField3 displacement_gradient(const FlowField &flow, const Spacing3 &spacing) {
    if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0)) throw InvalidParameter("spacing must be > 0");
    const Shape3 s = flow.shape();
    TensorField3 out(s, spacing);
    const double inv[3] = {1.0 / spacing.x, 1.0 / spacing.y, 1.0 / spacing.z};
    for_voxels(s.voxels(), [&](std::size_t i) {
        const std::size_t x = i % s.w, y = (i / s.w) % s.h, z = i / (s.w * s.h);
        for (std::size_t c = 0; c < 3; ++c)
            for (int a = 0; a < 3; ++a) out.at(i, c, a) = axis_derivative(flow, c, z, y, x, a) * inv[a];
    });
    return out;
}

TensorField3 deformation_gradient(const TensorField3 &grad_u) {
    TensorField3 F = grad_u;
    for (std::size_t i = 0; i < F.voxels(); ++i) {
        if (!F.valid(i)) continue;
        for (std::size_t d = 0; d < 3; ++d) F.at(i, d, d) += 1.0;
    }
    return F;
}

TensorField3 lagrangian_strain(const TensorField3 &F) {
    TensorField3 E(F.shape(), F.spacing());
    for_voxels(F.voxels(), [&](std::size_t i) {
        if (!F.valid(i)) {
            E.invalidate(i);
            return;
        }
        Tensor3 C = mul_transpose_left(F.tensor(i));
        for (std::size_t k = 0; k < 9; ++k) C[k] = 0.5 * (C[k] - (k % 4 == 0 ? 1.0 : 0.0));
        E.set_tensor(i, C);
    });
    return E;
}

TensorField3 eulerian_strain(const TensorField3 &F) {
    TensorField3 e(F.shape(), F.spacing());
    for_voxels(F.voxels(), [&](std::size_t i) {
        if (!F.valid(i)) {
            e.invalidate(i);
            return;
        }
        const Tensor3 a = F.tensor(i);
        const Tensor3 adj{a[4] * a[8] - a[5] * a[7], a[2] * a[7] - a[1] * a[8], a[1] * a[5] - a[2] * a[4],
                          a[5] * a[6] - a[3] * a[8], a[0] * a[8] - a[2] * a[6], a[2] * a[3] - a[0] * a[5],
                          a[3] * a[7] - a[4] * a[6], a[1] * a[6] - a[0] * a[7], a[0] * a[4] - a[1] * a[3]};
        const double det = a[0] * adj[0] + a[1] * adj[3] + a[2] * adj[6];
        if (!(std::abs(det) >= kDeterminantGuard)) {
            e.invalidate(i);
            return;
        }
        Tensor3 inv;
        for (std::size_t k = 0; k < 9; ++k) inv[k] = adj[k] / det;
        // c = F^-T F^-1 = (F^-1)^T (F^-1)
        Tensor3 c = mul_transpose_left(inv);
        for (std::size_t k = 0; k < 9; ++k) c[k] = 0.5 * ((k % 4 == 0 ? 1.0 : 0.0) - c[k]);
        e.set_tensor(i, c);
    });
    return e;
}

TensorField3 to_cylindrical(const TensorField3 &T, AxisCenter center, AngleConvention angle) {
    const Shape3 s = T.shape();
    if (!(center.x >= 0.0 && center.y >= 0.0 && center.x <= static_cast<double>(s.w - 1) &&
          center.y <= static_cast<double>(s.h - 1))) {
        throw InvalidParameter("cylinder axis center (" + std::to_string(center.y) + ", " + std::to_string(center.x) +
                               ") lies outside the in-plane grid");
    }
    TensorField3 out(s, T.spacing());
    for_voxels(s.voxels(), [&](std::size_t i) {
        const std::size_t x = i % s.w, y = (i / s.w) % s.h;
        const double dx = static_cast<double>(x) - center.x, dy = static_cast<double>(y) - center.y;
        if (!T.valid(i) || dx * dx + dy * dy < kAxisExclusionRadius * kAxisExclusionRadius) {
            out.invalidate(i);
            return;
        }
        const double theta = angle == AngleConvention::Atan2 ? std::atan2(dy, dx) : std::atan(dx / dy);
        const double c = std::cos(theta), sn = std::sin(theta);
        // Columns of R are the radial, circumferential and axial unit vectors.
        const Tensor3 R{c, -sn, 0.0, sn, c, 0.0, 0.0, 0.0, 1.0};
        const Tensor3 t = T.tensor(i);
        Tensor3 tr{};  // T R
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 3; ++k) acc += t[3 * a + k] * R[3 * k + b];
                tr[3 * a + b] = acc;
            }
        Tensor3 r{};  // R^T (T R)
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 3; ++k) acc += R[3 * k + a] * tr[3 * k + b];
                r[3 * a + b] = acc;
            }
        out.set_tensor(i, r);
    });
    return out;
}

TensorField3 compute_strain(const FlowField &flow, const StrainFrame &frame) {
    const TensorField3 F = deformation_gradient(displacement_gradient(flow));
    TensorField3 T = frame.kind == StrainKind::Lagrangian ? lagrangian_strain(F) : eulerian_strain(F);
    if (frame.coords == CoordSystem::Cylindrical) {
        T = to_cylindrical(T, frame.center ? *frame.center : default_center(flow.shape()), frame.angle);
    }
    return T;
}

PeakEntry peak_strain(const TensorField3 &T, std::size_t component, PeakMode mode, std::size_t trim,
                      const PeakMask &mask) {
    const Shape3 s = T.shape();
    if (component > 2) throw InvalidParameter("peak component must be 0, 1 or 2");
    if (2 * trim >= s.d) {
        throw InvalidParameter("trim of " + std::to_string(trim) + " slices leaves nothing of depth " +
                               std::to_string(s.d));
    }
    if (mask.labels) require_same_shape(s, mask.labels->shape(), "peak_strain mask");

    PeakEntry best;
    best.component = component;
    best.mode = mode;
    bool found = false;
    for (std::size_t z = trim; z + trim < s.d; ++z)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                const std::size_t i = s.index(z, y, x);
                if (!T.valid(i)) continue;
                if (mask.labels) {
                    const auto l = (*mask.labels)[i];
                    if (mask.label ? l != *mask.label : l == 0) continue;
                }
                const double v = T.at(i, component, component);
                const bool better = mode == PeakMode::SignedMax ? v > best.value : v < best.value;
                if (!found || better) {
                    best.value = v;
                    best.z = z;
                    best.y = y;
                    best.x = x;
                    found = true;
                }
            }
    if (!found) throw EmptyDomain("no valid voxel remains after trimming and masking");
    return best;
}

std::array<std::string, 3> component_names(CoordSystem coords) {
    if (coords == CoordSystem::Cylindrical) return {"radial", "circumferential", "longitudinal"};
    return {"xx", "yy", "zz"};
}

StrainReport summarize_strain(const TensorField3 &T, const StrainFrame &frame, std::size_t trim,
                              const PeakMask &mask) {
    StrainReport r;
    r.frame = frame;
    r.center = frame.center ? *frame.center : default_center(T.shape());
    r.trim = trim;
    r.masked = mask.labels != nullptr;
    r.mask_label = mask.label;
    r.component_names = component_names(frame.coords);
    for (std::size_t c = 0; c < 3; ++c) {
        r.peak_max[c] = peak_strain(T, c, PeakMode::SignedMax, trim, mask);
        r.peak_min[c] = peak_strain(T, c, PeakMode::SignedMin, trim, mask);
    }
    r.valid_voxels = T.valid_count();
    return r;
}

void save_tensor_rvf(const TensorField3 &T, const std::filesystem::path &path) {
    RvfImage img;
    img.shape = T.shape();
    img.spacing = T.spacing();
    img.channels = 9;
    img.samples.reserve(T.data().size());
    for (std::size_t i = 0; i < T.voxels(); ++i)
        for (std::size_t k = 0; k < 9; ++k) img.samples.push_back(T.valid(i) ? static_cast<float>(T.data()[9 * i + k]) : 0.0f);
    write_rvf(img, path);
}

TensorField3 load_tensor_rvf(const std::filesystem::path &path) {
    const RvfImage img = read_rvf(path);
    if (img.channels != 9) throw FormatError("'" + path.string() + "': tensor fields must have C=9");
    TensorField3 T(img.shape, img.spacing);
    for (std::size_t k = 0; k < img.samples.size(); ++k) T.data()[k] = img.samples[k];
    return T;
}

}  // namespace flowstrain
