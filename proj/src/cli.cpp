#include "flowstrain/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowstrain/error.hpp"
#include "flowstrain/imaging.hpp"
#include "flowstrain/netbench.hpp"
#include "flowstrain/parallel.hpp"
#include "flowstrain/phantom.hpp"
#include "flowstrain/registration.hpp"
#include "flowstrain/rvf.hpp"

namespace flowstrain::cli {

namespace {

constexpr const char *kRetestHelp =
    "CSV input: first line exactly 'patient,test,retest'; one row per patient, comma separated, '.' as the decimal "
    "point. Test and retest are either numbers (peak strains or differences) or paths to .rvf files holding a "
    "flow (C=3) or strain tensor (C=9); relative paths resolve against the CSV's directory.";

std::string trim_ws(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string &s) {
    if (s.empty()) return std::nullopt;
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception &) {
        return std::nullopt;
    }
    if (pos != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw IoError("failed writing '" + path + "'");
}

void emit(const Json &doc, const std::string &report_path, std::ostream &out) {
    if (report_path.empty()) {
        out << dump(doc);
    } else {
        write_text(report_path, dump(doc));
    }
}

Shape3 to_shape(const std::vector<std::size_t> &v) {
    if (v.size() != 3) throw InvalidParameter("a shape needs three extents D,H,W");
    if (v[0] == 0 || v[1] == 0 || v[2] == 0) throw InvalidParameter("shape extents must be >= 1");
    return {v[0], v[1], v[2]};
}

std::optional<AxisCenter> to_center(const std::vector<double> &v) {
    if (v.empty()) return std::nullopt;
    if (v.size() != 2) throw InvalidParameter("--center takes two values cy,cx");
    return AxisCenter{v[0], v[1]};
}

struct FrameArgs {
    std::string frame = "lagrangian";
    std::string coords = "cartesian";
    std::string angle = "atan2";
    std::vector<double> center;
    std::size_t trim = 0;

    void add(CLI::App *app, const std::string &default_coords, std::size_t default_trim) {
        coords = default_coords;
        trim = default_trim;
        app->add_option("--frame", frame, "Strain frame")
            ->check(CLI::IsMember({"lagrangian", "eulerian"}))
            ->capture_default_str();
        app->add_option("--coords", coords, "Coordinate system")
            ->check(CLI::IsMember({"cartesian", "cylindrical"}))
            ->capture_default_str();
        app->add_option("--angle", angle, "Angle convention: atan2(dy,dx) or literal atan(dx/dy)")
            ->check(CLI::IsMember({"atan2", "literal"}))
            ->capture_default_str();
        app->add_option("--center", center, "Cylinder axis cy,cx (default: grid centre)")->delimiter(',')->expected(2);
        app->add_option("--trim", trim, "Slices dropped at each end before peak search")->capture_default_str();
    }

    StrainFrame to_frame() const {
        StrainFrame f;
        f.kind = frame == "lagrangian" ? StrainKind::Lagrangian : StrainKind::Eulerian;
        f.coords = coords == "cartesian" ? CoordSystem::Cartesian : CoordSystem::Cylindrical;
        f.angle = angle == "atan2" ? AngleConvention::Atan2 : AngleConvention::Literal;
        f.center = to_center(center);
        return f;
    }
};

// ---- subcommands --------------------------------------------------------

struct RegisterArgs {
    std::string fixed, moving, output = "flow.rvf", report;
    std::string seg_fixed, seg_moving;
    std::vector<int> labels;
    std::string boundary = "clamp";
    CascadeConfig cfg;
};

void do_register(const RegisterArgs &a, std::ostream &out) {
    const Volume3 fixed = load_volume(a.fixed);
    const Volume3 moving = load_volume(a.moving);
    std::optional<Segmentations> segs;
    if (!a.seg_fixed.empty() || !a.seg_moving.empty()) {
        if (a.seg_fixed.empty() || a.seg_moving.empty()) {
            throw InvalidParameter("--seg-fixed and --seg-moving must be given together");
        }
        segs = Segmentations{load_labels(a.seg_fixed), load_labels(a.seg_moving), {a.labels.begin(), a.labels.end()}};
    }
    CascadeConfig cfg = a.cfg;
    cfg.boundary = a.boundary == "zero" ? Boundary::Zero : Boundary::Clamp;
    const RegReport r = register_images(fixed, moving, cfg, segs);
    save_rvf(r.flow, a.output);
    Json doc = to_json(r, cfg);
    doc["outputs"] = Json{{"flow", a.output}};
    emit(doc, a.report, out);
}

struct StrainArgs {
    std::string flow, output = "strain.rvf", report, mask, images;
    std::optional<int> mask_label;
    FrameArgs frame;
};

void do_strain(const StrainArgs &a, std::ostream &out) {
    const FlowField flow = load_flow(a.flow);
    const StrainFrame frame = a.frame.to_frame();
    const TensorField3 T = compute_strain(flow, frame);
    std::optional<LabelVolume> labels;
    PeakMask mask;
    if (!a.mask.empty()) {
        labels = load_labels(a.mask);
        mask.labels = &*labels;
        if (a.mask_label) mask.label = *a.mask_label;
    }
    const StrainReport rep = summarize_strain(T, frame, a.frame.trim, mask);
    save_tensor_rvf(T, a.output);
    Json doc = to_json(rep);
    Json outputs{{"strain", a.output}};
    if (!a.images.empty()) {
        std::filesystem::create_directories(a.images);
        Json imgs = Json::array();
        for (std::size_t c = 0; c < 3; ++c) {
            const std::string name = std::string(to_string(frame.kind)) + "_" + rep.component_names[c];
            imgs.push_back(to_json(emit_slice_images(T, c, c, name, std::filesystem::path(a.images) / name)));
        }
        outputs["images"] = imgs;
    }
    doc["outputs"] = outputs;
    emit(doc, a.report, out);
}

struct DiceArgs {
    std::string a, b, report;
    std::vector<int> labels;
};

void do_dice(const DiceArgs &a, std::ostream &out) {
    const LabelVolume x = load_labels(a.a), y = load_labels(a.b);
    require_same_shape(x.shape(), y.shape(), "dice");
    std::vector<int> labels = a.labels;
    if (labels.empty()) {
        std::vector<bool> seen;
        for (const LabelVolume *v : {&x, &y})
            for (auto l : v->labels()) {
                if (static_cast<std::size_t>(l) >= seen.size()) seen.resize(static_cast<std::size_t>(l) + 1, false);
                seen[static_cast<std::size_t>(l)] = true;
            }
        for (std::size_t l = 1; l < seen.size(); ++l)
            if (seen[l]) labels.push_back(static_cast<int>(l));
    }
    Json scores = Json::array();
    for (int l : labels) scores.push_back(Json{{"label", l}, {"dice", dice(x, y, l)}});
    emit(Json{{"schema_version", kSchemaVersion}, {"kind", "dice"}, {"scores", scores}}, a.report, out);
}

struct RetestArgs {
    std::string csv, report, mode = "abs", peak = "signed_max";
    FrameArgs frame;
};

void do_retest(const RetestArgs &a, std::ostream &out) {
    RetestOptions opts;
    opts.mode = a.mode == "abs" ? DifferenceMode::Absolute : DifferenceMode::Signed;
    opts.peak = a.peak == "signed_max" ? PeakMode::SignedMax : PeakMode::SignedMin;
    opts.frame = a.frame.to_frame();
    opts.trim = a.frame.trim;
    const auto rows = read_retest_csv(a.csv);
    emit(retest_report(rows, opts, std::filesystem::path(a.csv).parent_path()), a.report, out);
}

struct BenchArgs {
    std::vector<std::string> specs, cascades{"flir_unet=1,2,3,5"};
    std::vector<std::size_t> shape{16, 128, 128};
    std::size_t repetitions = 20;
    std::string baseline = "voxelmorph", report;
    std::uint64_t seed = 0;
};

void do_bench(const BenchArgs &a, std::ostream &out) {
    std::vector<ArchSpec> specs;
    if (a.specs.empty()) {
        specs = builtin_specs();
    } else {
        for (const auto &p : a.specs) specs.push_back(load_archspec(p));
    }
    std::map<std::string, std::vector<std::size_t>> ks;
    for (const std::string &item : a.cascades) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InvalidParameter("--cascades expects NAME=k1,k2,..., got '" + item + "'");
        std::vector<std::size_t> list;
        std::stringstream ss(item.substr(eq + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const auto v = parse_number(trim_ws(tok));
            if (!v || *v < 1 || *v != std::floor(*v)) throw InvalidParameter("bad cascade count '" + tok + "'");
            list.push_back(static_cast<std::size_t>(*v));
        }
        ks[item.substr(0, eq)] = list;
    }
    std::vector<BenchEntry> entries;
    for (const ArchSpec &s : specs) {
        const auto it = ks.find(s.name);
        if (it == ks.end()) {
            entries.push_back({s.name, s, 1});
        } else {
            for (std::size_t k : it->second) entries.push_back({s.name + " x" + std::to_string(k), s, k});
        }
    }
    BenchConfig cfg;
    cfg.shape = to_shape(a.shape);
    cfg.repetitions = a.repetitions;
    cfg.baseline = a.baseline;
    cfg.seed = a.seed;
    const BenchReport r = bench(entries, cfg);
    Json doc = to_json(r);
    Json costs = Json::array();
    for (const ArchSpec &s : specs) costs.push_back(to_json(count_costs(s, cfg.shape)));
    Json ordered;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (it.key() == "timing") ordered["costs"] = costs;
        ordered[it.key()] = it.value();
    }
    emit(ordered, a.report, out);
}

struct PhantomArgs {
    std::string out_dir, report;
    std::vector<std::size_t> shape{16, 64, 64};
    std::vector<double> center;
    PhantomParams p;
};

void do_phantom(const PhantomArgs &a, std::ostream &out) {
    PhantomParams p = a.p;
    p.shape = to_shape(a.shape);
    p.center = to_center(a.center);
    const PhantomPair pair = generate_pair(p);
    const std::filesystem::path dir(a.out_dir);
    std::filesystem::create_directories(dir);
    save_rvf(pair.fixed, dir / "fixed.rvf");
    save_rvf(pair.moving, dir / "moving.rvf");
    save_rvf(pair.true_flow, dir / "true_flow.rvf");
    save_rvf(pair.seg_fixed, dir / "seg_fixed.rvf");
    save_rvf(pair.seg_moving, dir / "seg_moving.rvf");
    const AxisCenter c = p.resolved_center();
    Json doc{{"schema_version", kSchemaVersion},
             {"kind", "phantom"},
             {"shape", Json::array({p.shape.d, p.shape.h, p.shape.w})},
             {"inner_radius", p.inner_radius},
             {"outer_radius", p.outer_radius},
             {"intensities", {{"background", p.background}, {"blood_pool", p.blood_pool}, {"myocardium", p.myocardium}}},
             {"alpha", p.alpha},
             {"beta", p.beta},
             {"sigma", p.sigma},
             {"noise_sd", p.noise_sd},
             {"seed", p.seed},
             {"center", {{"y", c.y}, {"x", c.x}}},
             {"dice_fixed_vs_moving",
              {{"blood_pool", dice(pair.seg_fixed, pair.seg_moving, kBloodPoolLabel)},
               {"myocardium", dice(pair.seg_fixed, pair.seg_moving, kMyocardiumLabel)}}},
             {"outputs", Json::array({"fixed.rvf", "moving.rvf", "true_flow.rvf", "seg_fixed.rvf", "seg_moving.rvf"})}};
    emit(doc, a.report, out);
}

}  // namespace

std::vector<RetestRow> read_retest_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || trim_ws(line) != "patient,test,retest") {
        throw FormatError("'" + path.string() + "': first line must be exactly 'patient,test,retest'");
    }
    std::vector<RetestRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_ws(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(trim_ws(cell));
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 3 || cells[1].empty() || cells[2].empty()) {
            throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected 3 fields");
        }
        rows.push_back({cells[0], cells[1], cells[2]});
    }
    return rows;
}

Json retest_report(const std::vector<RetestRow> &rows, const RetestOptions &opts,
                   const std::filesystem::path &base_dir) {
    bool numeric = true, paths = true;
    for (const auto &r : rows) {
        const bool num = parse_number(r.test) && parse_number(r.retest);
        numeric = numeric && num;
        paths = paths && !parse_number(r.test) && !parse_number(r.retest);
    }
    if (!numeric && !paths) throw FormatError("retest rows mix numbers and file paths");

    std::vector<std::string> names;
    // values[c][row] = (test, retest)
    std::vector<std::vector<std::pair<double, double>>> values;
    if (numeric) {
        names = {"value"};
        values.resize(1);
        for (const auto &r : rows) values[0].emplace_back(*parse_number(r.test), *parse_number(r.retest));
    } else {
        const auto cn = component_names(opts.frame.coords);
        names.assign(cn.begin(), cn.end());
        values.resize(3);
        auto peaks = [&](const std::string &file) {
            const std::filesystem::path p = std::filesystem::path(file).is_absolute() ? std::filesystem::path(file) : base_dir / file;
            const RvfImage img = read_rvf(p);
            TensorField3 T;
            if (img.channels == 3) {
                T = compute_strain(load_flow(p), opts.frame);
            } else if (img.channels == 9) {
                T = load_tensor_rvf(p);
            } else {
                throw FormatError("'" + p.string() + "' holds neither a flow nor a strain tensor");
            }
            std::array<double, 3> v{};
            for (std::size_t c = 0; c < 3; ++c) v[c] = peak_strain(T, c, opts.peak, opts.trim).value;
            return v;
        };
        for (const auto &r : rows) {
            const auto t = peaks(r.test), rt = peaks(r.retest);
            for (std::size_t c = 0; c < 3; ++c) values[c].emplace_back(t[c], rt[c]);
        }
    }

    Json comps = Json::array();
    for (std::size_t c = 0; c < names.size(); ++c) {
        Json table = Json::array();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto [t, rt] = values[c][i];
            const double d = opts.mode == DifferenceMode::Absolute ? std::abs(t - rt) : t - rt;
            table.push_back(Json{{"patient", rows[i].patient}, {"test", t}, {"retest", rt}, {"difference", d}});
        }
        comps.push_back(Json{{"name", names[c]},
                             {"rows", table},
                             {"bland_altman", to_json(bland_altman(values[c], opts.mode))}});
    }
    Json doc{{"schema_version", kSchemaVersion},
             {"kind", "retest"},
             {"mode", to_string(opts.mode)},
             {"input", numeric ? "values" : "files"}};
    if (!numeric) {
        doc["peak"] = to_string(opts.peak);
        doc["trim"] = opts.trim;
        doc["frame"] = Json{{"kind", to_string(opts.frame.kind)},
                            {"coords", to_string(opts.frame.coords)},
                            {"angle", to_string(opts.frame.angle)}};
    }
    doc["components"] = comps;
    return doc;
}

int run(const std::vector<std::string> &argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"flowstrain: dense volumetric registration, finite strain and network cost benchmarking"};
    app.name(argv.empty() ? "flowstrain" : argv.front());
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: FLOWSTRAIN_THREADS or all cores)");

    RegisterArgs reg;
    auto *c_reg = app.add_subcommand("register", "Optimise a flow field aligning MOVING to FIXED");
    c_reg->add_option("fixed", reg.fixed, "Fixed volume (.rvf, C=1)")->required()->check(CLI::ExistingFile);
    c_reg->add_option("moving", reg.moving, "Moving volume (.rvf, C=1)")->required()->check(CLI::ExistingFile);
    c_reg->add_option("-o,--output", reg.output, "Output flow (.rvf, C=3)")->capture_default_str();
    c_reg->add_option("--report", reg.report, "Write the JSON report here instead of stdout");
    c_reg->add_option("--cascades", reg.cfg.num_cascades, "Number of cascades")->capture_default_str();
    c_reg->add_option("--iterations", reg.cfg.iterations, "Iterations per pyramid level")->capture_default_str();
    c_reg->add_option("--levels", reg.cfg.pyramid_levels, "Pyramid levels")->capture_default_str();
    c_reg->add_option("--step", reg.cfg.step, "Adaptive-moment step size (voxels)")->capture_default_str();
    c_reg->add_option("--w-corrcoef", reg.cfg.weights.corrcoef, "Correlation loss weight")->capture_default_str();
    c_reg->add_option("--w-tv", reg.cfg.weights.tv, "Total-variation weight")->capture_default_str();
    c_reg->add_option("--seed", reg.cfg.seed, "Seed")->capture_default_str();
    c_reg->add_option("--boundary", reg.boundary, "Out-of-grid sampling")
        ->check(CLI::IsMember({"clamp", "zero"}))
        ->capture_default_str();
    c_reg->add_option("--seg-fixed", reg.seg_fixed, "Fixed label volume for dice")->check(CLI::ExistingFile);
    c_reg->add_option("--seg-moving", reg.seg_moving, "Moving label volume for dice")->check(CLI::ExistingFile);
    c_reg->add_option("--labels", reg.labels, "Labels to score (default: all non-zero)")->delimiter(',');

    StrainArgs st;
    auto *c_st = app.add_subcommand("strain", "Finite strain tensors and peak statistics from a flow field");
    c_st->add_option("flow", st.flow, "Flow field (.rvf, C=3)")->required()->check(CLI::ExistingFile);
    c_st->add_option("-o,--output", st.output, "Output tensor field (.rvf, C=9)")->capture_default_str();
    c_st->add_option("--report", st.report, "Write the JSON report here instead of stdout");
    c_st->add_option("--mask", st.mask, "Label volume restricting the peak search")->check(CLI::ExistingFile);
    c_st->add_option("--mask-label", st.mask_label, "Label kept by --mask (default: any non-zero)");
    c_st->add_option("--images", st.images, "Directory for per-slice PGM images of the diagonal components");
    st.frame.add(c_st, "cartesian", 0);

    DiceArgs di;
    auto *c_di = app.add_subcommand("dice", "Dice overlap per label between two label volumes");
    c_di->add_option("a", di.a, "Label volume")->required()->check(CLI::ExistingFile);
    c_di->add_option("b", di.b, "Label volume")->required()->check(CLI::ExistingFile);
    c_di->add_option("--labels", di.labels, "Labels to score (default: all non-zero)")->delimiter(',');
    c_di->add_option("--report", di.report, "Write the JSON report here instead of stdout");

    RetestArgs rt;
    auto *c_rt = app.add_subcommand("retest", "Test-retest agreement (Bland-Altman) of peak strains");
    c_rt->footer(kRetestHelp);
    c_rt->add_option("csv", rt.csv, "patient,test,retest CSV")->required()->check(CLI::ExistingFile);
    c_rt->add_option("--mode", rt.mode, "Difference: absolute or signed")
        ->check(CLI::IsMember({"abs", "signed"}))
        ->capture_default_str();
    c_rt->add_option("--peak", rt.peak, "Peak taken from each file")
        ->check(CLI::IsMember({"signed_max", "signed_min"}))
        ->capture_default_str();
    c_rt->add_option("--report", rt.report, "Write the JSON report here instead of stdout");
    rt.frame.add(c_rt, "cylindrical", 2);

    BenchArgs be;
    auto *c_be = app.add_subcommand("bench", "Cost model and forward-pass timing of architecture specs");
    c_be->add_option("--spec", be.specs, "Architecture file(s) (default: the builtin specs)")->check(CLI::ExistingFile);
    c_be->add_option("--cascades", be.cascades, "NAME=k1,k2,... cascade counts per spec")->capture_default_str();
    c_be->add_option("--shape", be.shape, "Input shape D,H,W")->delimiter(',')->expected(3)->capture_default_str();
    c_be->add_option("--repetitions", be.repetitions, "Measured runs (one extra warm-up is discarded)")
        ->capture_default_str();
    c_be->add_option("--baseline", be.baseline, "Entry label or spec name used for ratios")->capture_default_str();
    c_be->add_option("--seed", be.seed, "Weight and input seed")->capture_default_str();
    c_be->add_option("--report", be.report, "Write the JSON report here instead of stdout");

    PhantomArgs ph;
    auto *c_ph = app.add_subcommand("phantom", "Write a synthetic annulus pair with its true flow");
    c_ph->add_option("-o,--output", ph.out_dir, "Output directory")->required();
    c_ph->add_option("--shape", ph.shape, "Shape D,H,W")->delimiter(',')->expected(3)->capture_default_str();
    c_ph->add_option("--inner", ph.p.inner_radius, "Inner radius (voxels)")->capture_default_str();
    c_ph->add_option("--outer", ph.p.outer_radius, "Outer radius (voxels)")->capture_default_str();
    c_ph->add_option("--alpha", ph.p.alpha, "In-plane scale of the true flow")->capture_default_str();
    c_ph->add_option("--beta", ph.p.beta, "Axial stretch of the true flow")->capture_default_str();
    c_ph->add_option("--sigma", ph.p.sigma, "Edge smoothing (voxels)")->capture_default_str();
    c_ph->add_option("--noise", ph.p.noise_sd, "Additive Gaussian noise sd")->capture_default_str();
    c_ph->add_option("--seed", ph.p.seed, "Noise seed")->capture_default_str();
    c_ph->add_option("--center", ph.center, "Axis cy,cx (default: grid centre)")->delimiter(',')->expected(2);
    c_ph->add_option("--report", ph.report, "Write the JSON report here instead of stdout");

    try {
        std::vector<std::string> args(argv.size() > 1 ? argv.begin() + 1 : argv.end(), argv.end());
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        std::optional<parallel::ScopedThreadCount> scoped;
        if (threads > 0) scoped.emplace(threads);
        if (c_reg->parsed()) do_register(reg, out);
        else if (c_st->parsed()) do_strain(st, out);
        else if (c_di->parsed()) do_dice(di, out);
        else if (c_rt->parsed()) do_retest(rt, out);
        else if (c_be->parsed()) do_bench(be, out);
        else if (c_ph->parsed()) do_phantom(ph, out);
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Numerical ? kNumericalError : kDataError;
    } catch (const std::filesystem::filesystem_error &e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kOk;
}

int run(int argc, char **argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace flowstrain::cli
