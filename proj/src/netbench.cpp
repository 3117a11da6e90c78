#include "flowstrain/netbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "flowstrain/error.hpp"
#include "flowstrain/parallel.hpp"
#include "flowstrain/registration.hpp"

namespace flowstrain {

namespace {

// ---- DSL ----------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::size_t parse_count(const std::string &tok, std::size_t line, const char *what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(tok, &pos);
    } catch (const std::exception &) {
        pos = 0;
    }
    if (pos != tok.size() || tok.empty() || tok[0] == '-' || tok[0] == '+' || v == 0) {
        throw ParseError(line, std::string(what) + " must be a positive integer, got '" + tok + "'");
    }
    return static_cast<std::size_t>(v);
}

std::size_t ceil_half(std::size_t n) { return (n + 1) / 2; }

// ---- convolution kernel -------------------------------------------------

using v16 = float __attribute__((vector_size(64)));
constexpr std::size_t kLanes = 16;

inline v16 load(const float *p) {
    v16 v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

// Zero-padded copy of the input. Stride 1 rows are [0, x0..xW-1, 0, ...];
// stride 2 rows are split into even and odd padded columns so that the three
// taps become unit-stride reads at offsets {0, half, 1}.
struct PaddedInput {
    std::size_t dp = 0, hp = 0, row = 0;
    std::size_t off[3] = {0, 0, 0};
    std::vector<float> data;

    const float *row_ptr(std::size_t c, std::size_t z, std::size_t y) const {
        return data.data() + ((c * dp + z) * hp + y) * row;
    }
};

PaddedInput pad_input(const Tensor &in, std::size_t stride, std::size_t out_w) {
    const Shape3 s = in.shape;
    PaddedInput p;
    p.dp = s.d + 2;
    p.hp = s.h + 2;
    const std::size_t span = round_up(out_w, kLanes) + kLanes;
    if (stride == 1) {
        p.row = span;
        p.off[0] = 0;
        p.off[1] = 1;
        p.off[2] = 2;
    } else {
        p.row = 2 * span;
        p.off[0] = 0;
        p.off[1] = span;
        p.off[2] = 1;
    }
    p.data.assign(in.channels * p.dp * p.hp * p.row, 0.0f);
    parallel::for_chunks(in.channels, 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c)
            for (std::size_t z = 0; z < s.d; ++z)
                for (std::size_t y = 0; y < s.h; ++y) {
                    const float *src = in.channel(c) + s.index(z, y, 0);
                    float *dst = p.data.data() + ((c * p.dp + z + 1) * p.hp + y + 1) * p.row;
                    if (stride == 1) {
                        std::memcpy(dst + 1, src, s.w * sizeof(float));
                    } else {
                        // padded column j holds x = j - 1
                        for (std::size_t x = 0; x < s.w; ++x) {
                            const std::size_t j = x + 1;
                            dst[(j % 2) * span + j / 2] = src[x];
                        }
                    }
                }
    });
    return p;
}

template <std::size_t COB, std::size_t NV>
void conv_tile(const PaddedInput &p, std::size_t cin, std::size_t stride, const float *wblk, std::size_t oz,
               std::size_t oy, std::size_t x0, v16 (&acc)[COB][NV]) {
    for (std::size_t cb = 0; cb < COB; ++cb)
        for (std::size_t v = 0; v < NV; ++v) acc[cb][v] = v16{};
    for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t kz = 0; kz < 3; ++kz)
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const float *row = p.row_ptr(ci, oz * stride + kz, oy * stride + ky) + x0;
                const float *w = wblk + ((ci * 3 + kz) * 3 + ky) * 3 * COB;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    v16 in[NV];
                    for (std::size_t v = 0; v < NV; ++v) in[v] = load(row + p.off[kx] + v * kLanes);
                    for (std::size_t cb = 0; cb < COB; ++cb) {
                        const v16 wv = v16{} + w[kx * COB + cb];
                        for (std::size_t v = 0; v < NV; ++v) acc[cb][v] += wv * in[v];
                    }
                }
            }
}

template <std::size_t COB>
void conv_block(const PaddedInput &p, const ConvWeights &cw, std::size_t stride, Activation act, std::size_t co0,
                Tensor &out) {
    const std::size_t cin = cw.in;
    // [ci][kz][ky][kx][cb] for contiguous broadcasts.
    std::vector<float> wblk(cin * 27 * COB);
    for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t k = 0; k < 27; ++k)
            for (std::size_t cb = 0; cb < COB; ++cb) wblk[(ci * 27 + k) * COB + cb] = cw.w[((co0 + cb) * cin + ci) * 27 + k];

    const Shape3 os = out.shape;
    auto emit = [&](const float *vals, std::size_t cb, std::size_t oz, std::size_t oy, std::size_t x0,
                    std::size_t n) {
        float *dst = out.channel(co0 + cb) + os.index(oz, oy, x0);
        const float b = cw.bias[co0 + cb];
        for (std::size_t i = 0; i < n; ++i) {
            const float v = vals[i] + b;
            dst[i] = act == Activation::Linear ? v : leaky_relu(v);
        }
    };

    for (std::size_t oz = 0; oz < os.d; ++oz)
        for (std::size_t oy = 0; oy < os.h; ++oy) {
            std::size_t x0 = 0;
            for (; x0 + 4 * kLanes <= os.w; x0 += 4 * kLanes) {
                v16 acc[COB][4];
                conv_tile<COB, 4>(p, cin, stride, wblk.data(), oz, oy, x0, acc);
                for (std::size_t cb = 0; cb < COB; ++cb) {
                    alignas(64) float tmp[4 * kLanes];
                    std::memcpy(tmp, acc[cb], sizeof tmp);
                    emit(tmp, cb, oz, oy, x0, 4 * kLanes);
                }
            }
            for (; x0 < os.w; x0 += kLanes) {
                v16 acc[COB][1];
                conv_tile<COB, 1>(p, cin, stride, wblk.data(), oz, oy, x0, acc);
                for (std::size_t cb = 0; cb < COB; ++cb) {
                    alignas(64) float tmp[kLanes];
                    std::memcpy(tmp, acc[cb], sizeof tmp);
                    emit(tmp, cb, oz, oy, x0, std::min(kLanes, os.w - x0));
                }
            }
        }
}

Shape3 conv_out_shape(const Shape3 &in, std::size_t stride) {
    return stride == 1 ? in : Shape3{ceil_half(in.d), ceil_half(in.h), ceil_half(in.w)};
}

std::string shape_str(const Shape3 &s) {
    return "(" + std::to_string(s.d) + "," + std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

std::uint64_t fnv1a(std::uint64_t h, const void *bytes, std::size_t n) {
    const auto *p = static_cast<const unsigned char *>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic per-cascade seed derivation.
std::uint64_t cascade_seed(std::uint64_t seed, std::size_t k) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(k) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

// ---- DSL ----------------------------------------------------------------

ArchSpec parse_archspec(std::string_view text, std::string name) {
    ArchSpec spec;
    spec.name = std::move(name);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto tok = tokenize(line);
        if (tok.empty()) {
            if (end == text.size()) break;
            continue;
        }

        Layer layer;
        layer.line = line_no;
        const std::string &kw = tok[0];
        auto arity = [&](std::size_t lo, std::size_t hi) {
            if (tok.size() - 1 < lo || tok.size() - 1 > hi) {
                throw ParseError(line_no, "'" + kw + "' takes " + std::to_string(lo) +
                                              (lo == hi ? "" : "-" + std::to_string(hi)) + " argument(s), got " +
                                              std::to_string(tok.size() - 1));
            }
        };
        if (kw == "input") {
            arity(1, 1);
            if (!spec.layers.empty()) throw ParseError(line_no, "'input' must be the first and only input layer");
            layer.kind = LayerKind::Input;
            layer.channels = parse_count(tok[1], line_no, "input channels");
        } else {
            if (spec.layers.empty()) throw ParseError(line_no, "missing 'input' before '" + kw + "'");
            if (kw == "conv") {
                arity(1, 3);
                layer.kind = LayerKind::Conv;
                layer.channels = parse_count(tok[1], line_no, "conv channels");
                bool have_stride = false, have_act = false;
                for (std::size_t i = 2; i < tok.size(); ++i) {
                    if ((tok[i] == "s1" || tok[i] == "s2") && !have_stride) {
                        layer.stride = tok[i] == "s1" ? 1 : 2;
                        have_stride = true;
                    } else if (tok[i] == "linear" && !have_act) {
                        layer.activation = Activation::Linear;
                        have_act = true;
                    } else {
                        throw ParseError(line_no, "unexpected conv option '" + tok[i] + "'");
                    }
                }
            } else if (kw == "upsample") {
                arity(0, 0);
                layer.kind = LayerKind::Upsample;
            } else if (kw == "concat") {
                arity(1, 1);
                layer.kind = LayerKind::Concat;
                layer.source = parse_count(tok[1], line_no, "concat source");
                if (layer.source > spec.layers.size()) {
                    throw ParseError(line_no, "concat source " + tok[1] + " does not refer to an earlier layer");
                }
            } else if (kw == "output") {
                arity(0, 0);
                layer.kind = LayerKind::Output;
                layer.channels = 3;
                layer.activation = Activation::Linear;
            } else {
                throw ParseError(line_no, "unknown keyword '" + kw + "'");
            }
        }
        spec.layers.push_back(layer);
        if (end == text.size()) break;
    }
    if (spec.layers.empty()) throw ParseError(line_no == 0 ? 1 : line_no, "missing 'input' layer");
    const Layer &last = spec.layers.back();
    const bool head = (last.kind == LayerKind::Conv || last.kind == LayerKind::Output) && last.channels == 3;
    if (!head) throw ParseError(last.line, "the final layer must be a 3-channel conv or 'output'");
    return spec;
}

ArchSpec load_archspec(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open architecture file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string stem = path;
    if (const auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
    if (const auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    if (stem == "flir") stem = "flir_unet";
    return parse_archspec(ss.str(), stem);
}

std::string render_archspec(const ArchSpec &spec) {
    std::string out;
    for (const Layer &l : spec.layers) {
        switch (l.kind) {
        case LayerKind::Input: out += "input " + std::to_string(l.channels); break;
        case LayerKind::Conv:
            out += "conv " + std::to_string(l.channels) + " s" + std::to_string(l.stride);
            if (l.activation == Activation::Linear) out += " linear";
            break;
        case LayerKind::Upsample: out += "upsample"; break;
        case LayerKind::Concat: out += "concat " + std::to_string(l.source); break;
        case LayerKind::Output: out += "output"; break;
        }
        out += '\n';
    }
    return out;
}

std::vector<ArchSpec> builtin_specs() {
    return {builtin_spec("voxelmorph"), builtin_spec("voxelmorph_lite"), builtin_spec("flir_unet")};
}

ArchSpec builtin_spec(const std::string &name) {
    const auto &texts = builtin_spec_texts();
    const auto it = texts.find(name);
    if (it == texts.end()) throw InvalidParameter("no builtin architecture named '" + name + "'");
    return parse_archspec(it->second, name);
}

// ---- cost model ---------------------------------------------------------

CostTable count_costs(const ArchSpec &spec, const Shape3 &input_shape, std::size_t cascades) {
    if (input_shape.d == 0 || input_shape.h == 0 || input_shape.w == 0) throw ShapeError("input shape must be >= 1");
    if (cascades < 1) throw InvalidParameter("cascade count must be >= 1");
    CostTable t;
    t.name = spec.name;
    t.input_shape = input_shape;
    t.cascades = cascades;

    std::vector<std::size_t> channels;
    std::vector<Shape3> shapes;
    std::uint64_t macs = 0, params = 0, bias = 0, full = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const Layer &l = spec.layers[i];
        CostRow row;
        row.layer = i + 1;
        row.kind = l.kind;
        switch (l.kind) {
        case LayerKind::Input:
            row.channels = l.channels;
            row.shape = input_shape;
            break;
        case LayerKind::Conv:
        case LayerKind::Output: {
            const std::size_t cin = channels.back();
            row.channels = l.channels;
            row.shape = conv_out_shape(shapes.back(), l.stride);
            const std::uint64_t vox = row.shape.voxels();
            row.macs = vox * l.channels * cin * 27;
            row.params = static_cast<std::uint64_t>(l.channels) * cin * 27 + l.channels;
            row.bias_adds = vox * l.channels;
            break;
        }
        case LayerKind::Upsample: {
            const Shape3 s = shapes.back();
            row.channels = channels.back();
            row.shape = {2 * s.d, 2 * s.h, 2 * s.w};
            break;
        }
        case LayerKind::Concat: {
            const std::size_t src = l.source - 1;
            if (shapes[src].d != shapes.back().d || shapes[src].h != shapes.back().h ||
                shapes[src].w != shapes.back().w) {
                throw ShapeError(spec.name + " layer " + std::to_string(i + 1) + ": concat of " +
                                 shape_str(shapes.back()) + " with layer " + std::to_string(l.source) + " " +
                                 shape_str(shapes[src]));
            }
            row.channels = channels.back() + channels[src];
            row.shape = shapes.back();
            break;
        }
        }
        row.full_resolution = row.shape.d == input_shape.d && row.shape.h == input_shape.h &&
                              row.shape.w == input_shape.w;
        if (row.full_resolution) full += row.macs;
        macs += row.macs;
        params += row.params;
        bias += row.bias_adds;
        channels.push_back(row.channels);
        shapes.push_back(row.shape);
        t.rows.push_back(row);
    }
    const CostRow &last = t.rows.back();
    if (!last.full_resolution || last.channels != 3) {
        throw ShapeError(spec.name + ": head produces " + std::to_string(last.channels) + " channels at " +
                         shape_str(last.shape) + ", expected 3 at " + shape_str(input_shape));
    }
    t.total_macs = macs * cascades;
    t.total_params = params * cascades;
    t.total_bias_adds = bias * cascades;
    t.full_resolution_fraction = macs == 0 ? 0.0 : static_cast<double>(full) / static_cast<double>(macs);
    return t;
}

// ---- executor -----------------------------------------------------------

float leaky_relu(float v) { return v >= 0.0f ? v : kLeakySlope * v; }

Tensor upsample_nearest2(const Tensor &in) {
    const Shape3 s = in.shape;
    Tensor out(in.channels, {2 * s.d, 2 * s.h, 2 * s.w});
    const Shape3 o = out.shape;
    parallel::for_chunks(in.channels, 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c) {
            const float *src = in.channel(c);
            float *dst = out.channel(c);
            for (std::size_t z = 0; z < o.d; ++z)
                for (std::size_t y = 0; y < o.h; ++y) {
                    const float *r = src + s.index(z / 2, y / 2, 0);
                    float *d = dst + o.index(z, y, 0);
                    for (std::size_t x = 0; x < o.w; ++x) d[x] = r[x / 2];
                }
        }
    });
    return out;
}

Tensor conv3d(const Tensor &in, const ConvWeights &cw, std::size_t stride, Activation act) {
    if (cw.in != in.channels) {
        throw ShapeError("conv expects " + std::to_string(cw.in) + " input channels, got " + std::to_string(in.channels));
    }
    if (stride != 1 && stride != 2) throw InvalidParameter("conv stride must be 1 or 2");
    Tensor out(cw.out, conv_out_shape(in.shape, stride));
    const PaddedInput p = pad_input(in, stride, out.shape.w);
    constexpr std::size_t kBlock = 4;
    const std::size_t blocks = (cw.out + kBlock - 1) / kBlock;
    parallel::for_chunks(blocks, 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t blk = b; blk < e; ++blk) {
            const std::size_t co0 = blk * kBlock;
            switch (std::min(kBlock, cw.out - co0)) {
            case 4: conv_block<4>(p, cw, stride, act, co0, out); break;
            case 3: conv_block<3>(p, cw, stride, act, co0, out); break;
            case 2: conv_block<2>(p, cw, stride, act, co0, out); break;
            default: conv_block<1>(p, cw, stride, act, co0, out); break;
            }
        }
    });
    return out;
}

std::vector<ConvWeights> init_weights(const ArchSpec &spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<ConvWeights> out;
    std::vector<std::size_t> channels;
    for (const Layer &l : spec.layers) {
        std::size_t c = 0;
        switch (l.kind) {
        case LayerKind::Input: c = l.channels; break;
        case LayerKind::Upsample: c = channels.back(); break;
        case LayerKind::Concat: c = channels.back() + channels[l.source - 1]; break;
        case LayerKind::Conv:
        case LayerKind::Output: {
            ConvWeights cw;
            cw.in = channels.back();
            cw.out = l.channels;
            cw.w.resize(cw.out * cw.in * 27);
            for (float &w : cw.w) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
                w = static_cast<float>((2.0 * u - 1.0) * static_cast<double>(kWeightRange));
            }
            cw.bias.assign(cw.out, 0.0f);
            out.push_back(std::move(cw));
            c = l.channels;
            break;
        }
        }
        channels.push_back(c);
    }
    return out;
}

Tensor forward(const ArchSpec &spec, const std::vector<ConvWeights> &weights, const Tensor &input) {
    if (input.channels != spec.input_channels()) {
        throw ShapeError(spec.name + " expects " + std::to_string(spec.input_channels()) + " input channels, got " +
                         std::to_string(input.channels));
    }
    // Last layer (0-based) that reads each output; outputs are freed after it.
    const std::size_t n = spec.layers.size();
    std::vector<std::size_t> last_use(n, 0);
    for (std::size_t i = 1; i < n; ++i) {
        last_use[i - 1] = std::max(last_use[i - 1], i);
        if (spec.layers[i].kind == LayerKind::Concat) {
            last_use[spec.layers[i].source - 1] = std::max(last_use[spec.layers[i].source - 1], i);
        }
    }

    std::vector<Tensor> outs(n);
    std::size_t wi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Layer &l = spec.layers[i];
        switch (l.kind) {
        case LayerKind::Input: outs[i] = input; break;
        case LayerKind::Conv:
        case LayerKind::Output:
            outs[i] = conv3d(outs[i - 1], weights.at(wi++), l.stride, l.activation);
            break;
        case LayerKind::Upsample: outs[i] = upsample_nearest2(outs[i - 1]); break;
        case LayerKind::Concat: {
            const Tensor &a = outs[i - 1];
            const Tensor &b = outs[l.source - 1];
            if (a.shape.d != b.shape.d || a.shape.h != b.shape.h || a.shape.w != b.shape.w) {
                throw ShapeError(spec.name + " layer " + std::to_string(i + 1) + ": concat of " + shape_str(a.shape) +
                                 " with layer " + std::to_string(l.source) + " " + shape_str(b.shape));
            }
            Tensor cat(a.channels + b.channels, a.shape);
            std::copy(a.data.begin(), a.data.end(), cat.data.begin());
            std::copy(b.data.begin(), b.data.end(), cat.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
            outs[i] = std::move(cat);
            break;
        }
        }
        for (std::size_t j = 0; j < i; ++j)
            if (last_use[j] == i) outs[j] = Tensor{};
    }
    Tensor result = std::move(outs.back());
    if (result.shape.d != input.shape.d || result.shape.h != input.shape.h || result.shape.w != input.shape.w) {
        throw ShapeError(spec.name + ": output " + shape_str(result.shape) + " does not match input " +
                         shape_str(input.shape));
    }
    return result;
}

Tensor forward(const ArchSpec &spec, const Tensor &input, std::uint64_t seed) {
    return forward(spec, init_weights(spec, seed), input);
}

CascadeModel make_cascade_model(const ArchSpec &spec, std::size_t cascades, std::uint64_t seed) {
    if (cascades < 1) throw InvalidParameter("cascade count must be >= 1");
    if (spec.input_channels() != 2) throw ShapeError(spec.name + ": cascades need a 2-channel (fixed, moving) input");
    CascadeModel m;
    m.spec = spec;
    for (std::size_t k = 0; k < cascades; ++k) m.weights.push_back(init_weights(spec, cascade_seed(seed, k)));
    return m;
}

FlowField run_cascade(const CascadeModel &model, const Volume3 &fixed, const Volume3 &moving) {
    require_same_shape(fixed.shape(), moving.shape(), "run_cascade");
    const Shape3 s = fixed.shape();
    const std::size_t n = s.voxels();
    Tensor input(2, s);
    for (std::size_t i = 0; i < n; ++i) input.data[i] = static_cast<float>(fixed[i]);

    FlowField composed(s, fixed.spacing());
    Volume3 warped = moving;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        float *m = input.channel(1);
        for (std::size_t i = 0; i < n; ++i) m[i] = static_cast<float>(warped[i]);
        const Tensor out = forward(model.spec, model.weights[k], input);
        FlowField step(s, fixed.spacing());
        for (std::size_t c = 0; c < 3; ++c) {
            const float *src = out.channel(c);
            for (std::size_t i = 0; i < n; ++i) step.at(i, c) = src[i];
        }
        composed = k == 0 ? step : compose_flows(step, composed);
        warped = warp_image(moving, composed);
    }
    return composed;
}

std::string flow_checksum(const FlowField &flow) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : flow.data()) {
        const float f = static_cast<float>(v);
        h = fnv1a(h, &f, sizeof f);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- timing harness -----------------------------------------------------

double median(std::vector<double> v) {
    if (v.empty()) throw InsufficientData("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

LinearFit fit_line(const std::vector<double> &x, const std::vector<double> &y) {
    if (x.size() != y.size() || x.size() < 2) throw InsufficientData("a line fit needs >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw InsufficientData("a line fit needs >= 2 distinct x values");
    LinearFit f;
    f.k = x;
    f.seconds = y;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r_squared = syy == 0.0 ? (ss_res == 0.0 ? 1.0 : 0.0) : 1.0 - ss_res / syy;
    return f;
}

BenchReport bench(const std::vector<BenchEntry> &entries, const BenchConfig &config) {
    if (config.repetitions < 5) throw InvalidParameter("bench needs >= 5 measured repetitions");
    if (entries.empty()) throw InvalidParameter("bench needs at least one entry");
    const auto t_start = std::chrono::steady_clock::now();

    std::size_t base = entries.size();
    for (std::size_t i = 0; i < entries.size() && base == entries.size(); ++i)
        if (entries[i].label == config.baseline) base = i;
    for (std::size_t i = 0; i < entries.size() && base == entries.size(); ++i)
        if (entries[i].spec.name == config.baseline && entries[i].cascades == 1) base = i;
    if (base == entries.size()) throw InvalidParameter("baseline '" + config.baseline + "' is not among the entries");

    BenchReport report;
    report.config = config;
    report.threads = parallel::thread_count();

    // Deterministic pseudo-random image pair.
    std::mt19937_64 rng(config.seed);
    Volume3 fixed(config.shape), moving(config.shape);
    for (double &v : fixed.data()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    for (double &v : moving.data()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;

    std::vector<CascadeModel> models;
    for (const BenchEntry &e : entries) {
        BenchResult r;
        r.label = e.label;
        r.spec = e.spec.name;
        r.cascades = e.cascades;
        r.macs = count_costs(e.spec, config.shape, e.cascades).total_macs;
        report.results.push_back(r);
        models.push_back(make_cascade_model(e.spec, e.cascades, config.seed));
    }
    for (BenchResult &r : report.results) {
        r.predicted_ratio = static_cast<double>(r.macs) / static_cast<double>(report.results[base].macs);
    }

    for (std::size_t rep = 0; rep <= config.repetitions; ++rep) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const FlowField flow = run_cascade(models[i], fixed, moving);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            report.results[i].run_seconds.push_back(dt);
            if (rep == 0) report.results[i].output_checksum = flow_checksum(flow);
        }
    }

    for (BenchResult &r : report.results) {
        const std::vector<double> kept(r.run_seconds.begin() + 1, r.run_seconds.end());
        r.median_seconds = median(kept);
        std::vector<double> dev;
        for (double t : kept) dev.push_back(std::abs(t - r.median_seconds));
        r.mad_seconds = median(dev);
    }
    for (BenchResult &r : report.results) r.measured_ratio = r.median_seconds / report.results[base].median_seconds;

    // Linear fits for specs run at several cascade counts, in first-seen order.
    std::vector<std::string> names;
    for (const BenchResult &r : report.results)
        if (std::find(names.begin(), names.end(), r.spec) == names.end()) names.push_back(r.spec);
    for (const std::string &name : names) {
        std::vector<double> k, t;
        for (const BenchResult &r : report.results) {
            if (r.spec == name && std::find(k.begin(), k.end(), static_cast<double>(r.cascades)) == k.end()) {
                k.push_back(static_cast<double>(r.cascades));
                t.push_back(r.median_seconds);
            }
        }
        if (k.size() >= 2) {
            LinearFit f = fit_line(k, t);
            f.spec = name;
            report.fits.push_back(std::move(f));
        }
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

}  // namespace flowstrain
