#include <doctest.h>

#include <fstream>
#include <sstream>

#include "flowstrain/error.hpp"
#include "flowstrain/netbench.hpp"
#include "flowstrain/parallel.hpp"
#include "helpers.hpp"

using namespace flowstrain;

namespace {

std::string read_text(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t parse_error_line(const std::string &text) {
    try {
        parse_archspec(text);
    } catch (const ParseError &e) {
        return e.line();
    }
    return 0;
}

Tensor random_tensor(std::size_t c, Shape3 s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor t(c, s);
    for (float &v : t.data) v = u(rng);
    return t;
}

// Textbook zero-padded 3x3x3 convolution in double precision.
Tensor naive_conv(const Tensor &in, const ConvWeights &cw, std::size_t stride, Activation act) {
    const Shape3 s = in.shape;
    const Shape3 o{(s.d + stride - 1) / stride, (s.h + stride - 1) / stride, (s.w + stride - 1) / stride};
    Tensor out(cw.out, o);
    for (std::size_t co = 0; co < cw.out; ++co)
        for (std::size_t z = 0; z < o.d; ++z)
            for (std::size_t y = 0; y < o.h; ++y)
                for (std::size_t x = 0; x < o.w; ++x) {
                    double acc = cw.bias[co];
                    for (std::size_t ci = 0; ci < cw.in; ++ci)
                        for (int kz = 0; kz < 3; ++kz)
                            for (int ky = 0; ky < 3; ++ky)
                                for (int kx = 0; kx < 3; ++kx) {
                                    const long iz = static_cast<long>(z * stride) + kz - 1;
                                    const long iy = static_cast<long>(y * stride) + ky - 1;
                                    const long ix = static_cast<long>(x * stride) + kx - 1;
                                    if (iz < 0 || iy < 0 || ix < 0 || iz >= static_cast<long>(s.d) ||
                                        iy >= static_cast<long>(s.h) || ix >= static_cast<long>(s.w))
                                        continue;
                                    acc += static_cast<double>(cw.w[(co * cw.in + ci) * 27 + kz * 9 + ky * 3 + kx]) *
                                           in.channel(ci)[s.index(iz, iy, ix)];
                                }
                    const float v = static_cast<float>(acc);
                    out.channel(co)[o.index(z, y, x)] = act == Activation::Linear ? v : (v >= 0 ? v : 0.01f * v);
                }
    return out;
}

std::size_t full_res_convs(const ArchSpec &spec, Shape3 s) {
    std::size_t n = 0;
    for (const CostRow &r : count_costs(spec, s).rows)
        n += (r.kind == LayerKind::Conv || r.kind == LayerKind::Output) && r.full_resolution;
    return n;
}

}  // namespace

TEST_CASE("DSL parses the grammar example and round trips") {
    const ArchSpec a = parse_archspec("input 1\nconv 16 s2\nupsample\nconcat 1\nconv 3 s1 linear", "demo");
    REQUIRE(a.layers.size() == 5);
    CHECK(a.layers[0].kind == LayerKind::Input);
    CHECK(a.layers[1].stride == 2);
    CHECK(a.layers[1].activation == Activation::LeakyRelu);
    CHECK(a.layers[3].source == 1);
    CHECK(a.layers[4].activation == Activation::Linear);
    CHECK(parse_archspec(render_archspec(a), "demo") == a);
    for (const ArchSpec &b : builtin_specs()) CHECK(parse_archspec(render_archspec(b), b.name) == b);

    // Comments and blank lines are ignored.
    CHECK(parse_archspec("# net\ninput 2\n\nconv 8 # c\noutput\n").layers.size() == 3);
}

TEST_CASE("DSL errors carry line numbers") {
    CHECK(parse_error_line("input 1\nconv 16\nfrobnicate\noutput") == 3);
    CHECK(parse_error_line("input 1\nconv\noutput") == 2);
    CHECK(parse_error_line("input 1\nconv 16 s3\noutput") == 2);
    CHECK(parse_error_line("input 1\nconv -4\noutput") == 2);
    CHECK(parse_error_line("input 1\nconv 16\nconcat 7\noutput") == 3);
    CHECK(parse_error_line("input 1\nconcat 2\noutput") == 2);
    CHECK(parse_error_line("conv 16\noutput") == 1);
    CHECK(parse_error_line("input 1\ninput 1\noutput") == 2);
    CHECK(parse_error_line("input 1\nconv 16") == 2);
    CHECK(parse_error_line("") >= 1);
}

TEST_CASE("builtin specs match the shipped DSL files") {
    const std::string dir = std::string(FLOWSTRAIN_SOURCE_DIR) + "/specs/";
    const auto &texts = builtin_spec_texts();
    REQUIRE(texts.size() == 3);
    CHECK(texts.at("voxelmorph") == read_text(dir + "voxelmorph.arch"));
    CHECK(texts.at("voxelmorph_lite") == read_text(dir + "voxelmorph_lite.arch"));
    CHECK(texts.at("flir_unet") == read_text(dir + "flir.arch"));
    CHECK(load_archspec(dir + "flir.arch") == builtin_spec("flir_unet"));
    CHECK(load_archspec(dir + "voxelmorph.arch").name == "voxelmorph");
    CHECK_THROWS_AS(builtin_spec("resnet"), InvalidParameter);
}

TEST_CASE("full-resolution structure of the builtin specs") {
    const Shape3 s{16, 128, 128};
    const ArchSpec vm = builtin_spec("voxelmorph"), lite = builtin_spec("voxelmorph_lite"),
                   flir = builtin_spec("flir_unet");
    CHECK(full_res_convs(vm, s) == 4);
    CHECK(full_res_convs(lite, s) == 2);
    CHECK(full_res_convs(vm, s) - full_res_convs(lite, s) == 2);
    CHECK(full_res_convs(flir, s) == 2);
    // FLIR: the 16-channel refinement then the 3-channel head.
    const auto rows = count_costs(flir, s).rows;
    CHECK(rows[rows.size() - 2].channels == 16);
    CHECK(rows.back().channels == 3);

    const double fv = count_costs(vm, s).full_resolution_fraction;
    const double fl = count_costs(lite, s).full_resolution_fraction;
    const double ff = count_costs(flir, s).full_resolution_fraction;
    CHECK(fv > fl);
    CHECK(fl > ff);
}

TEST_CASE("cost model: exact MAC count, shapes, totals and additivity") {
    const ArchSpec one = parse_archspec("input 1\nconv 16\nconv 3 s1 linear");
    const CostTable t = count_costs(one, {16, 128, 128});
    CHECK(t.rows[1].macs == 113246208ull);
    CHECK(t.rows[1].macs == 16ull * 128 * 128 * 16 * 1 * 27);
    CHECK(t.rows[1].params == 16ull * 27 + 16);
    CHECK(t.rows[1].bias_adds == 16ull * 128 * 128 * 16);

    const ArchSpec down = parse_archspec("input 1\nconv 4 s2\nupsample\nconv 3 s1 linear");
    const CostTable d = count_costs(down, {16, 128, 128});
    CHECK(d.rows[1].shape == Shape3{8, 64, 64});
    CHECK_THROWS_AS(count_costs(down, {5, 9, 7}), ShapeError);  // odd extents cannot come back up
    ConvWeights cw{1, 1, std::vector<float>(27, 0.0f), {0.0f}};
    CHECK(conv3d(Tensor(1, {5, 9, 7}), cw, 2, Activation::Linear).shape == Shape3{3, 5, 4});

    for (const ArchSpec &spec : builtin_specs()) {
        const CostTable c1 = count_costs(spec, {16, 128, 128});
        std::uint64_t macs = 0, params = 0;
        for (const CostRow &r : c1.rows) {
            macs += r.macs;
            params += r.params;
        }
        CHECK(c1.total_macs == macs);
        CHECK(c1.total_params == params);
        for (std::size_t k : {2u, 3u, 5u}) CHECK(count_costs(spec, {16, 128, 128}, k).total_macs == k * macs);
    }
    CHECK_THROWS_AS(count_costs(builtin_spec("flir_unet"), {8, 128, 128}), ShapeError);
    CHECK_THROWS_AS(count_costs(parse_archspec("input 1\nconv 3 s2 linear"), {4, 4, 4}), ShapeError);
}

TEST_CASE("executor primitives") {
    CHECK(leaky_relu(-1.0f) == -0.01f);
    CHECK(leaky_relu(2.0f) == 2.0f);
    CHECK(leaky_relu(0.0f) == 0.0f);

    Tensor block(1, Shape3{2, 2, 2});
    for (std::size_t i = 0; i < 8; ++i) block.data[i] = static_cast<float>(i + 1);
    const Tensor up = upsample_nearest2(block);
    REQUIRE(up.shape == Shape3{4, 4, 4});
    for (std::size_t z = 0; z < 4; ++z)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 4; ++x)
                CHECK(up.data[up.shape.index(z, y, x)] == block.data[block.shape.index(z / 2, y / 2, x / 2)]);

    // Identity kernel: centre tap 1, linear, zero bias.
    const Tensor in = random_tensor(3, {3, 5, 19}, 1);
    ConvWeights id{3, 3, std::vector<float>(3 * 3 * 27, 0.0f), std::vector<float>(3, 0.0f)};
    for (std::size_t c = 0; c < 3; ++c) id.w[(c * 3 + c) * 27 + 13] = 1.0f;
    CHECK(conv3d(in, id, 1, Activation::Linear).data == in.data);
}

TEST_CASE("property: vectorised convolution matches a textbook convolution") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-0.5f, 0.5f);
    const std::vector<std::tuple<std::size_t, std::size_t, Shape3>> cases{
        {1, 16, {4, 6, 17}}, {3, 5, {3, 7, 33}}, {7, 9, {5, 5, 5}}, {2, 4, {1, 1, 40}}, {6, 1, {2, 9, 16}}};
    for (const auto &[cin, cout, s] : cases)
        for (std::size_t stride : {1u, 2u})
            for (Activation act : {Activation::LeakyRelu, Activation::Linear}) {
                ConvWeights cw{cin, cout, std::vector<float>(cin * cout * 27), std::vector<float>(cout)};
                for (float &w : cw.w) w = u(rng);
                for (float &b : cw.bias) b = u(rng);
                const Tensor in = random_tensor(cin, s, rng());
                const Tensor got = conv3d(in, cw, stride, act), want = naive_conv(in, cw, stride, act);
                REQUIRE(got.shape == want.shape);
                REQUIRE(got.channels == cout);
                float err = 0.0f;
                for (std::size_t i = 0; i < got.data.size(); ++i) err = std::max(err, std::abs(got.data[i] - want.data[i]));
                CHECK(err < 1e-4f);
            }
}

TEST_CASE("forward passes: shapes, seeded weights and thread-count determinism") {
    const Shape3 s{16, 32, 32};
    const Volume3 fixed = testutil::random_volume(s, 1), moving = testutil::random_volume(s, 2);
    for (const ArchSpec &spec : builtin_specs()) {
        CAPTURE(spec.name);
        const auto w = init_weights(spec, 5);
        bool in_range = true, zero_bias = true;
        for (const ConvWeights &cw : w) {
            for (float v : cw.w) in_range = in_range && v >= -kWeightRange && v <= kWeightRange;
            for (float b : cw.bias) zero_bias = zero_bias && b == 0.0f;
        }
        CHECK(in_range);
        CHECK(zero_bias);
        FlowField a, b;
        {
            parallel::ScopedThreadCount one(1);
            a = cascade_forward(spec, fixed, moving, 2, 9);
        }
        {
            parallel::ScopedThreadCount many(4);
            b = cascade_forward(spec, fixed, moving, 2, 9);
        }
        CHECK(a.shape() == s);
        CHECK(a.all_finite());
        CHECK(a == b);
        CHECK(flow_checksum(a) == flow_checksum(b));
        CHECK(flow_checksum(a).size() == 16);
        CHECK(flow_checksum(a) != flow_checksum(cascade_forward(spec, fixed, moving, 2, 10)));
    }
    CHECK_THROWS_AS(forward(builtin_spec("voxelmorph"), Tensor(1, s), 0), ShapeError);
}

TEST_CASE("statistics helpers") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    const LinearFit f = fit_line({1, 2, 3, 5}, {2.5, 4.5, 6.5, 10.5});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(0.5));
    CHECK(f.r_squared == doctest::Approx(1.0));
    const LinearFit g = fit_line({1, 2, 3, 4}, {1, 3, 2, 4});
    CHECK(g.r_squared == doctest::Approx(0.64));
}

TEST_CASE("bench: self-ratio, bookkeeping and validation") {
    const ArchSpec vm = builtin_spec("voxelmorph");
    BenchConfig cfg;
    cfg.shape = {16, 32, 32};
    cfg.repetitions = 5;
    cfg.baseline = "first";
    const BenchReport r = bench({{"first", vm, 1}, {"second", vm, 1}, {"flir x2", builtin_spec("flir_unet"), 2}}, cfg);
    REQUIRE(r.results.size() == 3);
    for (const BenchResult &res : r.results) CHECK(res.run_seconds.size() == 6);
    CHECK(r.results[0].measured_ratio == 1.0);
    CHECK(r.results[1].predicted_ratio == 1.0);
    CHECK(r.results[1].output_checksum == r.results[0].output_checksum);
    CHECK(r.results[1].measured_ratio == doctest::Approx(1.0).epsilon(0.25));
    CHECK(r.results[2].macs == count_costs(builtin_spec("flir_unet"), cfg.shape, 2).total_macs);
    // Medians ignore the warm-up run.
    std::vector<double> kept(r.results[0].run_seconds.begin() + 1, r.results[0].run_seconds.end());
    CHECK(r.results[0].median_seconds == median(kept));

    cfg.repetitions = 4;
    CHECK_THROWS_AS(bench({{"first", vm, 1}}, cfg), InvalidParameter);
    cfg.repetitions = 5;
    cfg.baseline = "missing";
    CHECK_THROWS_AS(bench({{"first", vm, 1}}, cfg), InvalidParameter);
}
