#include <doctest.h>

#include <cmath>
#include <set>

#include "flowstrain/error.hpp"
#include "flowstrain/objective.hpp"
#include "flowstrain/phantom.hpp"
#include "flowstrain/strain.hpp"

using namespace flowstrain;

TEST_CASE("annulus labels match a brute-force rasterisation") {
    PhantomParams p;  // r_i = 8, r_o = 14 on (16, 64, 64)
    const Annulus a = make_annulus(p);
    std::size_t expect_myo = 0, expect_pool = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const double r = std::hypot(y - 31.5, x - 31.5);
            if (r < 8.0) ++expect_pool;
            else if (r <= 14.0) ++expect_myo;
        }
    std::size_t myo = 0, pool = 0;
    for (auto l : a.labels.labels()) {
        myo += l == kMyocardiumLabel;
        pool += l == kBloodPoolLabel;
    }
    CHECK(myo == 16 * expect_myo);
    CHECK(pool == 16 * expect_pool);
}

TEST_CASE("annulus intensities and smoothing") {
    PhantomParams p;
    p.sigma = 0.0;
    const Annulus sharp = make_annulus(p);
    const std::set<double> values(sharp.image.data().begin(), sharp.image.data().end());
    CHECK(values == std::set<double>{0.0, 50.0, 100.0});

    p.sigma = 1.5;
    const Annulus soft = make_annulus(p);
    CHECK(soft.labels == sharp.labels);
    CHECK(std::set<double>(soft.image.data().begin(), soft.image.data().end()).size() > 3);

    // A blur of a constant is the constant; a blur preserves the interior mean of a ramp.
    Volume3 ramp(Shape3{1, 1, 21});
    for (std::size_t x = 0; x < 21; ++x) ramp[x] = static_cast<double>(x);
    const Volume3 blurred = gaussian_smooth(ramp, 1.0);
    CHECK(blurred[10] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(gaussian_smooth(ramp, 0.0) == ramp);
}

TEST_CASE("affine flow and pair generation") {
    const Shape3 s{4, 8, 8};
    const FlowField zero = make_affine_flow(s, default_center(s), 0.0, 0.0);
    for (double v : zero.data()) CHECK(v == 0.0);
    const FlowField f = make_affine_flow(s, AxisCenter{2.0, 3.0}, 0.1, -0.2);
    const std::size_t v = s.index(3, 6, 1);
    CHECK(f.at(v, 0) == doctest::Approx(0.1 * (1 - 3.0)));
    CHECK(f.at(v, 1) == doctest::Approx(0.1 * (6 - 2.0)));
    CHECK(f.at(v, 2) == doctest::Approx(-0.2 * (3 - 1.5)));

    PhantomParams still;
    still.alpha = 0.0;
    const PhantomPair same = generate_pair(still);
    CHECK(same.fixed == same.moving);
    CHECK(same.seg_fixed == same.seg_moving);

    const PhantomPair pair = generate_pair(PhantomParams{});
    const double d = dice(pair.seg_fixed, pair.seg_moving, kMyocardiumLabel);
    CHECK(d < 1.0);
    CHECK(d > 0.5);
    CHECK(pair.fixed == warp_image(pair.moving, pair.true_flow));
    CHECK(pair.seg_fixed == warp_labels(pair.seg_moving, pair.true_flow));
}

TEST_CASE("phantom flows have closed-form strain") {
    PhantomParams p;
    p.beta = -0.1;
    const PhantomPair pair = generate_pair(p);
    StrainFrame cyl;
    cyl.coords = CoordSystem::Cylindrical;
    const TensorField3 T = compute_strain(pair.true_flow, cyl);
    CHECK(T.valid_count() == T.voxels());
    for (std::size_t v = 0; v < T.voxels(); ++v) {
        CHECK(std::abs(T.at(v, 0, 0) - 0.105) < 1e-6);
        CHECK(std::abs(T.at(v, 1, 1) - 0.105) < 1e-6);
        CHECK(std::abs(T.at(v, 2, 2) - (0.81 - 1.0) / 2.0) < 1e-6);
    }
}

TEST_CASE("generation is deterministic and seed-dependent") {
    PhantomParams p;
    p.shape = {8, 48, 48};
    p.noise_sd = 0.5;
    p.seed = 3;
    const PhantomPair a = generate_pair(p), b = generate_pair(p);
    CHECK(a.fixed == b.fixed);
    CHECK(a.moving == b.moving);
    p.seed = 4;
    const PhantomPair c = generate_pair(p);
    CHECK_FALSE(a.fixed == c.fixed);
    CHECK(a.seg_fixed == c.seg_fixed);
}

TEST_CASE("property: phantom pairs are symmetric under in-plane quarter turns") {
    PhantomParams p;
    p.shape = {4, 40, 40};
    p.inner_radius = 6;
    p.outer_radius = 11;
    const PhantomPair a = generate_pair(p);
    const Shape3 s = p.shape;
    double worst = 0.0;
    std::size_t label_mismatch = 0;
    for (std::size_t z = 0; z < s.d; ++z)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                // (y, x) -> (x, W-1-y) is a quarter turn about the grid centre.
                const std::size_t i = s.index(z, y, x), j = s.index(z, x, s.w - 1 - y);
                worst = std::max(worst, std::abs(a.fixed[i] - a.fixed[j]));
                label_mismatch += a.seg_fixed[i] != a.seg_fixed[j];
                // The flow rotates with the grid: (u_x, u_y) -> (-u_y, u_x).
                worst = std::max(worst, std::abs(a.true_flow.at(j, 0) + a.true_flow.at(i, 1)));
                worst = std::max(worst, std::abs(a.true_flow.at(j, 1) - a.true_flow.at(i, 0)));
            }
    CHECK(worst < 1e-9);
    CHECK(label_mismatch == 0);
}

TEST_CASE("parameter validation") {
    auto bad = [](auto edit) {
        PhantomParams p;
        edit(p);
        return p;
    };
    CHECK_THROWS_AS(make_annulus(bad([](PhantomParams &p) { p.inner_radius = 0; })), InvalidParameter);
    CHECK_THROWS_AS(make_annulus(bad([](PhantomParams &p) { p.inner_radius = 15; })), InvalidParameter);
    CHECK_THROWS_AS(make_annulus(bad([](PhantomParams &p) { p.outer_radius = 32; })), InvalidParameter);
    CHECK_THROWS_AS(make_annulus(bad([](PhantomParams &p) { p.sigma = -1; })), InvalidParameter);
    CHECK_THROWS_AS(make_annulus(bad([](PhantomParams &p) { p.noise_sd = -1; })), InvalidParameter);
    CHECK_THROWS_AS(make_annulus(bad([](PhantomParams &p) { p.center = AxisCenter{70, 3}; })), InvalidParameter);
    // The expanded moving annulus would leave the grid.
    CHECK_THROWS_AS(generate_pair(bad([](PhantomParams &p) { p.alpha = -0.5; })), InvalidParameter);
    CHECK_THROWS_AS(generate_pair(bad([](PhantomParams &p) { p.center = AxisCenter{12, 12}; })), InvalidParameter);
}
