// netbench.hpp - architecture DSL, cost model, forward-only executor and timing harness.
//
// DSL, one layer per line, '#' starts a comment:
//   input <C>
//   conv <C> [s1|s2] [linear]      3x3x3, zero padding, leaky ReLU (k = 0.01) unless linear
//   upsample                       nearest neighbour x2
//   concat <layer>                 channel concat with an earlier layer (1-based)
//   output                         conv 3 s1 linear
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "flowstrain/volume.hpp"

namespace flowstrain {

inline constexpr float kLeakySlope = 0.01f;
inline constexpr float kWeightRange = 0.05f;

enum class LayerKind { Input, Conv, Upsample, Concat, Output };
enum class Activation { LeakyRelu, Linear };

struct Layer {
    LayerKind kind = LayerKind::Input;
    std::size_t channels = 0;       // Input, Conv, Output
    std::size_t stride = 1;         // Conv
    Activation activation = Activation::LeakyRelu;
    std::size_t source = 0;         // Concat, 1-based
    std::size_t line = 0;           // source line, 0 when built in code

    bool operator==(const Layer &o) const {
        return kind == o.kind && channels == o.channels && stride == o.stride && activation == o.activation &&
               source == o.source;
    }
};

struct ArchSpec {
    std::string name;
    std::vector<Layer> layers;

    bool operator==(const ArchSpec &o) const { return name == o.name && layers == o.layers; }
    std::size_t input_channels() const { return layers.front().channels; }
};

// Throws ParseError carrying the offending line number.
ArchSpec parse_archspec(std::string_view text, std::string name = {});
ArchSpec load_archspec(const std::string &path);
std::string render_archspec(const ArchSpec &spec);

// DSL text of the shipped specs; identical to specs/<name>.arch.
const std::map<std::string, std::string> &builtin_spec_texts();
std::vector<ArchSpec> builtin_specs();  // voxelmorph, voxelmorph_lite, flir_unet
ArchSpec builtin_spec(const std::string &name);

struct CostRow {
    std::size_t layer = 0;          // 1-based
    LayerKind kind = LayerKind::Input;
    std::size_t channels = 0;
    Shape3 shape;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    std::uint64_t bias_adds = 0;
    bool full_resolution = false;
};

struct CostTable {
    std::string name;
    Shape3 input_shape;
    std::size_t cascades = 1;
    std::vector<CostRow> rows;      // one cascade
    std::uint64_t total_params = 0; // all cascades
    std::uint64_t total_macs = 0;   // all cascades
    std::uint64_t total_bias_adds = 0;
    double full_resolution_fraction = 0.0;
};

// Throws ShapeError on spatial underflow, concat shape mismatch or a head that
// does not return 3 channels at input resolution.
CostTable count_costs(const ArchSpec &spec, const Shape3 &input_shape, std::size_t cascades = 1);

// Dense float activations, channel-major [C][D][H][W].
struct Tensor {
    std::size_t channels = 0;
    Shape3 shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::size_t c, const Shape3 &s) : channels(c), shape(s), data(c * s.voxels(), 0.0f) {}
    float *channel(std::size_t c) { return data.data() + c * shape.voxels(); }
    const float *channel(std::size_t c) const { return data.data() + c * shape.voxels(); }
};

float leaky_relu(float v);
Tensor upsample_nearest2(const Tensor &in);

// Weights of one conv layer, [out][in][27], plus bias.
struct ConvWeights {
    std::size_t in = 0, out = 0;
    std::vector<float> w;
    std::vector<float> bias;
};

// Direct 3x3x3 convolution with zero padding and output ceil(in/stride).
Tensor conv3d(const Tensor &in, const ConvWeights &weights, std::size_t stride, Activation act);

// Uniform weights in [-kWeightRange, kWeightRange] from a seeded mt19937_64, zero bias.
std::vector<ConvWeights> init_weights(const ArchSpec &spec, std::uint64_t seed);

Tensor forward(const ArchSpec &spec, const std::vector<ConvWeights> &weights, const Tensor &input);
Tensor forward(const ArchSpec &spec, const Tensor &input, std::uint64_t seed);

// k chained copies of one network, each with its own weights.
struct CascadeModel {
    ArchSpec spec;
    std::vector<std::vector<ConvWeights>> weights;  // one set per cascade
};

CascadeModel make_cascade_model(const ArchSpec &spec, std::size_t cascades, std::uint64_t seed);

// flow_k = net_k(fixed, warped_{k-1}); flows are composed and the moving image is
// re-warped from the original through the composed flow. Needs a 2-channel input.
FlowField run_cascade(const CascadeModel &model, const Volume3 &fixed, const Volume3 &moving);

inline FlowField cascade_forward(const ArchSpec &spec, const Volume3 &fixed, const Volume3 &moving,
                                 std::size_t cascades, std::uint64_t seed) {
    return run_cascade(make_cascade_model(spec, cascades, seed), fixed, moving);
}

// FNV-1a over the float32 bit patterns of the flow, as 16 hex digits.
std::string flow_checksum(const FlowField &flow);

struct BenchEntry {
    std::string label;              // e.g. "flir_unet x3"
    ArchSpec spec;
    std::size_t cascades = 1;
};

struct BenchConfig {
    Shape3 shape{16, 128, 128};
    std::size_t repetitions = 20;   // measured runs; one extra warm-up run is discarded
    std::string baseline = "voxelmorph";
    std::uint64_t seed = 0;
};

struct LinearFit {
    std::string spec;
    std::vector<double> k;
    std::vector<double> seconds;
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};

struct BenchResult {
    std::string label;
    std::string spec;
    std::size_t cascades = 1;
    std::uint64_t macs = 0;
    double predicted_ratio = 0.0;   // MACs relative to the baseline
    std::string output_checksum;    // hex of the final flow's bit pattern digest
    // Measured, not reproducible:
    std::vector<double> run_seconds;  // including the discarded warm-up at index 0
    double median_seconds = 0.0;
    double mad_seconds = 0.0;
    double measured_ratio = 0.0;
};

struct BenchReport {
    BenchConfig config;
    std::size_t threads = 1;
    std::vector<BenchResult> results;
    std::vector<LinearFit> fits;    // one per spec benchmarked at >= 2 cascade counts
    double wall_seconds = 0.0;
};

// Round-robin over entries, repetitions + 1 passes, the first pass discarded.
// Throws InvalidParameter if repetitions < 5 or the baseline is not an entry.
BenchReport bench(const std::vector<BenchEntry> &entries, const BenchConfig &config);

LinearFit fit_line(const std::vector<double> &x, const std::vector<double> &y);
double median(std::vector<double> v);

}  // namespace flowstrain
