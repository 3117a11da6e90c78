// Python bindings: NumPy arrays in, NumPy arrays and JSON text out.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <sstream>

#include "flowstrain/cli.hpp"
#include "flowstrain/error.hpp"
#include "flowstrain/netbench.hpp"
#include "flowstrain/objective.hpp"
#include "flowstrain/parallel.hpp"
#include "flowstrain/phantom.hpp"
#include "flowstrain/registration.hpp"
#include "flowstrain/report.hpp"
#include "flowstrain/strain.hpp"

namespace py = pybind11;
using namespace flowstrain;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I32 = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Shape3 shape_of(const py::array &a, std::size_t trailing) {
    if (a.ndim() != static_cast<py::ssize_t>(3 + (trailing ? 1 : 0)))
        throw ShapeMismatch("expected a " + std::to_string(3 + (trailing ? 1 : 0)) + "-d array");
    if (trailing && a.shape(3) != static_cast<py::ssize_t>(trailing))
        throw ShapeMismatch("last axis must have length " + std::to_string(trailing));
    return {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
            static_cast<std::size_t>(a.shape(2))};
}

Volume3 to_volume(const F64 &a) {
    const Shape3 s = shape_of(a, 0);
    return Volume3(s, {}, std::vector<double>(a.data(), a.data() + a.size()));
}

FlowField to_flow(const F64 &a) {
    const Shape3 s = shape_of(a, 3);
    return FlowField(s, {}, std::vector<double>(a.data(), a.data() + a.size()));
}

LabelVolume to_labels(const I32 &a) {
    const Shape3 s = shape_of(a, 0);
    return LabelVolume(s, std::vector<LabelVolume::Label>(a.data(), a.data() + a.size()));
}

template <class T>
py::array_t<T> to_array(const std::vector<T> &v, std::vector<py::ssize_t> shape) {
    py::array_t<T> out(shape);
    std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(T));
    return out;
}

std::vector<py::ssize_t> dims(const Shape3 &s) {
    return {static_cast<py::ssize_t>(s.d), static_cast<py::ssize_t>(s.h), static_cast<py::ssize_t>(s.w)};
}

py::array_t<double> from_volume(const Volume3 &v) { return to_array(v.data(), dims(v.shape())); }

py::array_t<double> from_flow(const FlowField &f) {
    auto d = dims(f.shape());
    d.push_back(3);
    return to_array(f.data(), d);
}

py::array_t<std::int32_t> from_labels(const LabelVolume &l) { return to_array(l.labels(), dims(l.shape())); }

StrainKind parse_kind(const std::string &s) {
    if (s == "lagrangian") return StrainKind::Lagrangian;
    if (s == "eulerian") return StrainKind::Eulerian;
    throw InvalidParameter("kind must be lagrangian or eulerian");
}

CoordSystem parse_coords(const std::string &s) {
    if (s == "cartesian") return CoordSystem::Cartesian;
    if (s == "cylindrical") return CoordSystem::Cylindrical;
    throw InvalidParameter("coords must be cartesian or cylindrical");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "flowstrain native core";

    static py::exception<Error> base(m, "FlowstrainError", PyExc_RuntimeError);
    static py::exception<Error> data_error(m, "DataError", base.ptr());
    static py::exception<Error> numerical_error(m, "NumericalError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error &e) {
            py::set_error(e.kind() == ErrorKind::Numerical ? numerical_error : data_error, e.what());
        }
    });

    m.def("set_threads", &parallel::set_thread_count, py::arg("n"));
    m.def("threads", &parallel::thread_count);

    m.def(
        "warp_image", [](const F64 &moving, const F64 &flow) { return from_volume(warp_image(to_volume(moving), to_flow(flow))); },
        py::arg("moving"), py::arg("flow"));
    m.def(
        "corrcoef", [](const F64 &a, const F64 &b) { return corrcoef(to_volume(a), to_volume(b)); }, py::arg("warped"),
        py::arg("fixed"));
    m.def("tv_loss", [](const F64 &flow) { return tv_loss(to_flow(flow)); }, py::arg("flow"));
    m.def(
        "dice", [](const I32 &a, const I32 &b, int label) { return dice(to_labels(a), to_labels(b), label); },
        py::arg("a"), py::arg("b"), py::arg("label"));
    m.def(
        "loss_and_grad",
        [](const F64 &fixed, const F64 &moving, const F64 &flow, double w_cc, double w_tv) {
            const LossGradient lg = total_loss_and_grad(to_volume(fixed), to_volume(moving), to_flow(flow), {w_cc, w_tv});
            return py::make_tuple(lg.loss.total, from_flow(lg.gradient));
        },
        py::arg("fixed"), py::arg("moving"), py::arg("flow"), py::arg("corrcoef_weight") = 1.0,
        py::arg("tv_weight") = 0.5);

    m.def(
        "register_images",
        [](const F64 &fixed, const F64 &moving, std::size_t cascades, std::size_t iterations, std::size_t levels,
           double step, double w_cc, double w_tv, std::uint64_t seed) {
            CascadeConfig cfg;
            cfg.num_cascades = cascades;
            cfg.iterations = iterations;
            cfg.pyramid_levels = levels;
            cfg.step = step;
            cfg.weights = {w_cc, w_tv};
            cfg.seed = seed;
            RegReport r;
            {
                const Volume3 f = to_volume(fixed), mv = to_volume(moving);
                py::gil_scoped_release release;
                r = register_images(f, mv, cfg);
            }
            return py::make_tuple(from_flow(r.flow), dump(to_json(r, cfg)));
        },
        py::arg("fixed"), py::arg("moving"), py::arg("cascades") = 1, py::arg("iterations") = 200,
        py::arg("pyramid_levels") = 3, py::arg("step") = 0.1, py::arg("corrcoef_weight") = 1.0,
        py::arg("tv_weight") = 0.5, py::arg("seed") = 0);

    m.def(
        "compute_strain",
        [](const F64 &flow, const std::string &kind, const std::string &coords) {
            StrainFrame frame;
            frame.kind = parse_kind(kind);
            frame.coords = parse_coords(coords);
            const TensorField3 T = compute_strain(to_flow(flow), frame);
            auto d = dims(T.shape());
            auto dt = d;
            dt.push_back(3);
            dt.push_back(3);
            py::array_t<bool> valid(d);
            for (std::size_t i = 0; i < T.voxels(); ++i) valid.mutable_data()[i] = T.valid(i);
            return py::make_tuple(to_array(T.data(), dt), valid);
        },
        py::arg("flow"), py::arg("kind") = "lagrangian", py::arg("coords") = "cartesian");

    m.def(
        "generate_phantom",
        [](std::vector<std::size_t> shape, double alpha, double beta, double noise, std::uint64_t seed) {
            if (shape.size() != 3) throw InvalidParameter("shape needs 3 entries");
            PhantomParams p;
            p.shape = {shape[0], shape[1], shape[2]};
            p.alpha = alpha;
            p.beta = beta;
            p.noise_sd = noise;
            p.seed = seed;
            const PhantomPair pair = generate_pair(p);
            py::dict out;
            out["fixed"] = from_volume(pair.fixed);
            out["moving"] = from_volume(pair.moving);
            out["true_flow"] = from_flow(pair.true_flow);
            out["seg_fixed"] = from_labels(pair.seg_fixed);
            out["seg_moving"] = from_labels(pair.seg_moving);
            return out;
        },
        py::arg("shape") = std::vector<std::size_t>{16, 64, 64}, py::arg("alpha") = 0.1, py::arg("beta") = 0.0,
        py::arg("noise") = 0.0, py::arg("seed") = 0);

    m.def(
        "bland_altman",
        [](const std::vector<double> &test, const std::vector<double> &retest, const std::string &mode) {
            if (test.size() != retest.size()) throw ShapeMismatch("test and retest differ in length");
            if (mode != "abs" && mode != "signed") throw InvalidParameter("mode must be abs or signed");
            std::vector<std::pair<double, double>> pairs;
            for (std::size_t i = 0; i < test.size(); ++i) pairs.emplace_back(test[i], retest[i]);
            return dump(to_json(bland_altman(pairs, mode == "abs" ? DifferenceMode::Absolute : DifferenceMode::Signed)));
        },
        py::arg("test"), py::arg("retest"), py::arg("mode") = "abs");

    m.def(
        "count_costs",
        [](const std::string &spec, std::vector<std::size_t> shape, std::size_t cascades) {
            if (shape.size() != 3) throw InvalidParameter("shape needs 3 entries");
            const ArchSpec a = builtin_spec_texts().count(spec) ? builtin_spec(spec) : parse_archspec(spec);
            return dump(to_json(count_costs(a, {shape[0], shape[1], shape[2]}, cascades)));
        },
        py::arg("spec"), py::arg("shape") = std::vector<std::size_t>{16, 128, 128}, py::arg("cascades") = 1);

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "flowstrain");
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
