#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>

#include "flowstrain/error.hpp"
#include "helpers.hpp"

using namespace flowstrain;

TEST_CASE("grid types reject invalid construction") {
    CHECK_THROWS_AS(Volume3(Shape3{0, 2, 2}), InvalidParameter);
    CHECK_THROWS_AS(Volume3(Shape3{1, 1, 2}, {}, std::vector<double>{1.0}), InvalidParameter);
    CHECK_THROWS_AS(Volume3(Shape3{1, 1, 1}, {}, std::vector<double>{std::nan("")}), InvalidParameter);
    CHECK_THROWS_AS(FlowField(Shape3{1, 1, 1}, {}, std::vector<double>{0.0, 0.0}), InvalidParameter);
    CHECK_THROWS_AS(LabelVolume(Shape3{1, 1, 1}, std::vector<LabelVolume::Label>{-1}), InvalidParameter);
}

TEST_CASE("trilinear sampling at lattice points returns stored values") {
    const Volume3 v = testutil::random_volume({4, 5, 6}, 1);
    CHECK(trilinear_sample(v, {1, 2, 3}) == v.at(1, 2, 3));
    for (std::size_t z = 0; z < 4; ++z)
        for (std::size_t y = 0; y < 5; ++y)
            for (std::size_t x = 0; x < 6; ++x) {
                const Point3 p{static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
                CHECK(trilinear_sample(v, p) == v.at(z, y, x));
            }
}

TEST_CASE("trilinear sampling midpoint and clamping") {
    const Volume3 pair({1, 1, 2}, {}, std::vector<double>{0.0, 100.0});
    CHECK(trilinear_sample(pair, {0, 0, 0.5}) == doctest::Approx(50.0).epsilon(1e-15));

    const Volume3 v = testutil::random_volume({3, 3, 3}, 2);
    CHECK(trilinear_sample(v, {-5, 0, 0}) == v.at(0, 0, 0));
    CHECK(trilinear_sample(v, {10, 10, 10}) == v.at(2, 2, 2));
    CHECK_THROWS_AS(trilinear_sample(v, {std::nan(""), 0, 0}), InvalidCoordinate);
    CHECK_THROWS_AS(trilinear_sample(v, {0, std::numeric_limits<double>::infinity(), 0}), InvalidCoordinate);
}

TEST_CASE("zero boundary reads zeros outside the grid") {
    const Volume3 v({1, 1, 2}, {}, std::vector<double>{4.0, 8.0});
    CHECK(trilinear_sample(v, {0, 0, -1.0}, Boundary::Zero) == 0.0);
    CHECK(trilinear_sample(v, {0, 0, -0.5}, Boundary::Zero) == doctest::Approx(2.0));
    CHECK(trilinear_sample(v, {0, 0, 1.5}, Boundary::Zero) == doctest::Approx(4.0));
}

TEST_CASE("property: trilinear sampling is exact on affine fields") {
    const Shape3 s{5, 6, 7};
    const double a = 0.7, b = -1.3, c = 2.1, d = 0.4;
    Volume3 v(s);
    for (std::size_t z = 0; z < s.d; ++z)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) v.at(z, y, x) = a * z + b * y + c * x + d;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uz(0, 4), uy(0, 5), ux(0, 6);
    for (int i = 0; i < 500; ++i) {
        const Point3 p{uz(rng), uy(rng), ux(rng)};
        CHECK(std::abs(trilinear_sample(v, p) - (a * p.z + b * p.y + c * p.x + d)) < 1e-5);
    }
}

TEST_CASE("property: in-bounds samples stay within the data range") {
    const Volume3 v = testutil::random_volume({4, 4, 4}, 4, -3.0, 5.0);
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const double s = trilinear_sample(v, {u(rng), u(rng), u(rng)});
        CHECK(s >= *lo);
        CHECK(s <= *hi);
    }
}

TEST_CASE("sample gradient matches central differences of the interpolant") {
    const Volume3 v = testutil::random_volume({4, 5, 6}, 6);
    const Point3 p{1.37, 2.61, 3.22};
    const SampleGradient g = trilinear_sample_gradient(v, p);
    const double h = 1e-6;
    auto f = [&](double dz, double dy, double dx) { return trilinear_sample(v, {p.z + dz, p.y + dy, p.x + dx}); };
    CHECK(g.value == trilinear_sample(v, p));
    CHECK(g.dz == doctest::Approx((f(h, 0, 0) - f(-h, 0, 0)) / (2 * h)).epsilon(1e-6));
    CHECK(g.dy == doctest::Approx((f(0, h, 0) - f(0, -h, 0)) / (2 * h)).epsilon(1e-6));
    CHECK(g.dx == doctest::Approx((f(0, 0, h) - f(0, 0, -h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("warp_image: identity, ramp shift and errors") {
    const Volume3 v = testutil::random_volume({3, 4, 5}, 7);
    CHECK(warp_image(v, FlowField(v.shape())) == v);

    const Volume3 ramp({1, 1, 4}, {}, std::vector<double>{0, 1, 2, 3});
    FlowField shift(ramp.shape());
    for (std::size_t i = 0; i < 4; ++i) shift.at(i, 0) = 1.0;
    const Volume3 out = warp_image(ramp, shift);
    for (std::size_t x = 0; x < 4; ++x) CHECK(out[x] == std::min(static_cast<double>(x) + 1.0, 3.0));

    FlowField bad(v.shape());
    bad.at(5, 1) = std::nan("");
    CHECK_THROWS_AS(warp_image(v, bad), InvalidCoordinate);
    CHECK_THROWS_AS(warp_image(v, FlowField(Shape3{3, 4, 4})), ShapeMismatch);
}

TEST_CASE("warp_labels: identity, relocation and rounding") {
    LabelVolume seg(Shape3{4, 6, 6});
    seg.at(1, 2, 3) = 5;
    CHECK(warp_labels(seg, FlowField(seg.shape())) == seg);

    // out(p) = seg(p + u): a constant displacement u moves the label by -u.
    FlowField f(seg.shape());
    for (std::size_t i = 0; i < seg.size(); ++i) {
        f.at(i, 0) = 2.0;
        f.at(i, 1) = -1.0;
        f.at(i, 2) = 1.0;
    }
    const LabelVolume moved = warp_labels(seg, f);
    for (std::size_t z = 0; z < 4; ++z)
        for (std::size_t y = 0; y < 6; ++y)
            for (std::size_t x = 0; x < 6; ++x) {
                const bool hit = (z + 1 == 1) && (y == 3) && (x + 2 == 3);
                CHECK(moved.at(z, y, x) == (hit ? 5 : 0));
            }

    // Half-way sample positions round away from zero, then clamp to the grid.
    LabelVolume line(Shape3{1, 1, 3}, std::vector<LabelVolume::Label>{1, 2, 3});
    FlowField half(line.shape());
    for (std::size_t i = 0; i < 3; ++i) half.at(i, 0) = 0.5;
    CHECK(warp_labels(line, half).labels() == std::vector<LabelVolume::Label>{2, 3, 3});
    for (std::size_t i = 0; i < 3; ++i) half.at(i, 0) = -0.5;
    CHECK(warp_labels(line, half).labels() == std::vector<LabelVolume::Label>{1, 2, 3});
}

TEST_CASE("property: warped labels never leave the input label set") {
    const Shape3 s{3, 5, 5};
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pick(0, 2);
    LabelVolume seg(s);
    for (auto &l : seg.labels()) l = pick(rng) == 0 ? 0 : 7;
    for (int trial = 0; trial < 1000; ++trial) {
        const LabelVolume out = warp_labels(seg, testutil::random_flow(s, 100 + trial, 3.0));
        const std::set<LabelVolume::Label> got(out.labels().begin(), out.labels().end());
        for (auto l : got) CHECK((l == 0 || l == 7));
    }
}
