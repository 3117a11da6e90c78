#include "flowstrain/report.hpp"

#include "flowstrain/netbench.hpp"

namespace flowstrain {

namespace {

Json shape_json(const Shape3 &s) { return Json::array({s.d, s.h, s.w}); }

Json peak_json(const PeakEntry &p) {
    return Json{{"value", p.value}, {"z", p.z}, {"y", p.y}, {"x", p.x}};
}

const char *kind_name(LayerKind k) {
    switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::Conv: return "conv";
    case LayerKind::Upsample: return "upsample";
    case LayerKind::Concat: return "concat";
    case LayerKind::Output: return "output";
    }
    return "?";
}

}  // namespace

const char *to_string(StrainKind kind) { return kind == StrainKind::Lagrangian ? "lagrangian" : "eulerian"; }
const char *to_string(CoordSystem coords) { return coords == CoordSystem::Cartesian ? "cartesian" : "cylindrical"; }
const char *to_string(AngleConvention angle) { return angle == AngleConvention::Atan2 ? "atan2" : "literal"; }
const char *to_string(PeakMode mode) { return mode == PeakMode::SignedMax ? "signed_max" : "signed_min"; }
const char *to_string(DifferenceMode mode) { return mode == DifferenceMode::Absolute ? "abs" : "signed"; }

Json to_json(const LossBreakdown &loss) {
    return Json{{"corrcoef_loss", loss.corrcoef_loss}, {"tv_loss", loss.tv_loss}, {"total", loss.total}};
}

Json to_json(const AgreementStats &s) {
    return Json{{"n", s.n},
                {"mean_diff", s.mean_diff},
                {"sd_diff", s.sd_diff},
                {"loa_low", s.loa_low},
                {"loa_high", s.loa_high}};
}

Json to_json(const CascadeConfig &cfg) {
    return Json{{"num_cascades", cfg.num_cascades},
                {"iterations", cfg.iterations},
                {"pyramid_levels", cfg.pyramid_levels},
                {"step", cfg.step},
                {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},
                {"epsilon", cfg.epsilon},
                {"weights", {{"corrcoef", cfg.weights.corrcoef}, {"tv", cfg.weights.tv}}},
                {"seed", cfg.seed},
                {"boundary", cfg.boundary == Boundary::Clamp ? "clamp" : "zero"}};
}

Json to_json(const RegReport &r, const CascadeConfig &cfg) {
    Json traces = Json::array();
    for (const LevelTrace &t : r.traces) {
        Json cc = Json::array(), tv = Json::array(), total = Json::array();
        for (const LossBreakdown &l : t.trajectory) {
            cc.push_back(l.corrcoef_loss);
            tv.push_back(l.tv_loss);
            total.push_back(l.total);
        }
        traces.push_back(Json{{"cascade", t.cascade + 1},
                              {"level", t.level},
                              {"shape", shape_json(t.shape)},
                              {"corrcoef_loss", cc},
                              {"tv_loss", tv},
                              {"total", total}});
    }
    Json dice = Json::array();
    for (const DiceEntry &d : r.dice) dice.push_back(Json{{"label", d.label}, {"before", d.before}, {"after", d.after}});
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "register"},
                {"config", to_json(cfg)},
                {"shape", shape_json(r.flow.shape())},
                {"identity_loss", to_json(r.identity_loss)},
                {"final_loss", to_json(r.final_loss)},
                {"cascade_corrcoef_loss", r.cascade_corrcoef_loss},
                {"total_iterations", r.total_iterations},
                {"dice", dice},
                {"flow_checksum", flow_checksum(r.flow)},
                {"traces", traces},
                {"timing", {{"wall_seconds", r.wall_seconds}}}};
}

Json to_json(const StrainReport &r) {
    Json comps = Json::array();
    for (std::size_t c = 0; c < 3; ++c) {
        comps.push_back(Json{{"name", r.component_names[c]},
                             {"signed_max", peak_json(r.peak_max[c])},
                             {"signed_min", peak_json(r.peak_min[c])}});
    }
    Json frame{{"kind", to_string(r.frame.kind)},
               {"coords", to_string(r.frame.coords)},
               {"angle", to_string(r.frame.angle)}};
    if (r.frame.coords == CoordSystem::Cylindrical) frame["center"] = Json{{"y", r.center.y}, {"x", r.center.x}};
    Json mask{{"applied", r.masked}};
    if (r.mask_label) mask["label"] = *r.mask_label;
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "strain"},
                {"frame", frame},
                {"trim", r.trim},
                {"mask", mask},
                {"valid_voxels", r.valid_voxels},
                {"components", comps}};
}

Json to_json(const CostTable &t) {
    Json rows = Json::array();
    for (const CostRow &row : t.rows) {
        rows.push_back(Json{{"layer", row.layer},
                            {"kind", kind_name(row.kind)},
                            {"channels", row.channels},
                            {"shape", shape_json(row.shape)},
                            {"params", row.params},
                            {"macs", row.macs},
                            {"bias_adds", row.bias_adds},
                            {"full_resolution", row.full_resolution}});
    }
    return Json{{"name", t.name},
                {"input_shape", shape_json(t.input_shape)},
                {"cascades", t.cascades},
                {"total_params", t.total_params},
                {"total_macs", t.total_macs},
                {"total_bias_adds", t.total_bias_adds},
                {"full_resolution_fraction", t.full_resolution_fraction},
                {"rows", rows}};
}

Json to_json(const BenchReport &r) {
    Json results = Json::array(), timed = Json::array(), fits = Json::array();
    for (const BenchResult &b : r.results) {
        results.push_back(Json{{"label", b.label},
                               {"spec", b.spec},
                               {"cascades", b.cascades},
                               {"macs", b.macs},
                               {"predicted_ratio", b.predicted_ratio},
                               {"output_checksum", b.output_checksum}});
        timed.push_back(Json{{"label", b.label},
                             {"median_seconds", b.median_seconds},
                             {"mad_seconds", b.mad_seconds},
                             {"measured_ratio", b.measured_ratio},
                             {"predicted_over_measured", b.predicted_ratio / b.measured_ratio},
                             {"first_run_discarded", true},
                             {"run_seconds", b.run_seconds}});
    }
    for (const LinearFit &f : r.fits) {
        fits.push_back(Json{{"spec", f.spec},
                            {"k", f.k},
                            {"median_seconds", f.seconds},
                            {"slope", f.slope},
                            {"intercept", f.intercept},
                            {"r_squared", f.r_squared}});
    }
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "bench"},
                {"shape", shape_json(r.config.shape)},
                {"repetitions", r.config.repetitions},
                {"baseline", r.config.baseline},
                {"seed", r.config.seed},
                {"results", results},
                {"timing",
                 {{"threads", r.threads}, {"wall_seconds", r.wall_seconds}, {"results", timed}, {"fits", fits}}}};
}

Json to_json(const SliceImageInfo &info) {
    return Json{{"component", info.component},
                {"min", info.min},
                {"max", info.max},
                {"degenerate_range", info.degenerate_range},
                {"sidecar", info.sidecar.filename().string()},
                {"files", info.files}};
}

Json deterministic_part(const Json &doc) {
    Json out = doc;
    if (out.is_object()) out.erase("timing");
    return out;
}

std::string dump(const Json &doc) { return doc.dump(2) + "\n"; }

}  // namespace flowstrain
