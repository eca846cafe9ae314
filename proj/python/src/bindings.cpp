// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/blur.hpp"
#include "evseg/cmax.hpp"
#include "evseg/error.hpp"
#include "evseg/eval.hpp"
#include "evseg/event_io.hpp"
#include "evseg/pipeline.hpp"
#include "evseg/synth.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace evseg;

namespace {

using U16 = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>;
using I64 = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;
using I8 = py::array_t<std::int8_t, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Bool = py::array_t<bool, py::array::c_style | py::array::forcecast>;

py::dict events_to_dict(EventStream const &s) {
    auto const n = static_cast<py::ssize_t>(s.events.size());
    py::array_t<std::int64_t> t(n);
    py::array_t<std::uint16_t> x(n), y(n);
    py::array_t<std::int8_t> p(n);
    auto tt = t.mutable_unchecked<1>();
    auto xx = x.mutable_unchecked<1>();
    auto yy = y.mutable_unchecked<1>();
    auto pp = p.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < n; ++i) {
        auto const &e = s.events[static_cast<std::size_t>(i)];
        tt(i) = static_cast<std::int64_t>(e.t);
        xx(i) = e.x;
        yy(i) = e.y;
        pp(i) = e.polarity;
    }
    py::dict d;
    d["t"] = t;
    d["x"] = x;
    d["y"] = y;
    d["p"] = p;
    d["width"] = s.width;
    d["height"] = s.height;
    return d;
}

std::vector<Event> events_from_arrays(I64 const &t, U16 const &x, U16 const &y,
                                      I8 const &p) {
    auto const n = t.size();
    if (x.size() != n || y.size() != n || p.size() != n)
        throw InvalidArgument("event arrays must have equal length");
    auto tt = t.unchecked<1>();
    auto xx = x.unchecked<1>();
    auto yy = y.unchecked<1>();
    auto pp = p.unchecked<1>();
    std::vector<Event> ev(static_cast<std::size_t>(n));
    for (py::ssize_t i = 0; i < n; ++i) {
        if (tt(i) < 0)
            throw InvalidArgument("timestamps must be non-negative");
        ev[static_cast<std::size_t>(i)] = {static_cast<Timestamp>(tt(i)), xx(i),
                                           yy(i), pp(i)};
    }
    return ev;
}

BinaryMask mask_from_array(Bool const &a) {
    if (a.ndim() != 2)
        throw InvalidArgument("mask must be 2-D");
    auto r = a.unchecked<2>();
    BinaryMask m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    for (py::ssize_t y = 0; y < a.shape(0); ++y)
        for (py::ssize_t x = 0; x < a.shape(1); ++x)
            m(static_cast<int>(x), static_cast<int>(y)) = r(y, x) ? 1 : 0;
    return m;
}

py::array_t<double> field_to_array(ScalarField const &f) {
    py::array_t<double> out({f.height(), f.width()});
    auto w = out.mutable_unchecked<2>();
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x)
            w(y, x) = f(x, y);
    return out;
}

py::dict motion_dict(MotionParams const &m) {
    py::dict d;
    d["vx"] = m.vx;
    d["vy"] = m.vy;
    d["hz"] = m.hz;
    d["phi"] = m.phi;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Event-camera motion segmentation";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());

    m.def(
        "read_events",
        [](std::string const &path, int width, int height) {
            return events_to_dict(read_events(path, width, height));
        },
        py::arg("path"), py::arg("width") = 0, py::arg("height") = 0,
        "Read an .evs or .csv stream into numpy arrays t, x, y, p.");

    m.def(
        "generate_scene",
        [](std::string const &scene_json, std::optional<std::uint64_t> seed) {
            auto const spec = scene_spec_from_json(scene_json);
            auto const s = seed.value_or(scene_seed_from_json(scene_json, 1));
            auto const scene = generate_scene(spec, s);
            auto d = events_to_dict(scene.stream);
            d["labels"] = py::array_t<std::uint16_t>(
                static_cast<py::ssize_t>(scene.labels.size()), scene.labels.data());
            py::list motions;
            for (auto const &mo : scene.object_motions)
                motions.append(motion_dict(mo));
            d["object_motions"] = motions;
            return d;
        },
        py::arg("scene_json"), py::arg("seed") = py::none(),
        "Generate a synthetic scene from its JSON description.");

    m.def(
        "write_scene",
        [](std::string const &scene_json, std::string const &out_dir,
           std::optional<std::uint64_t> seed) {
            auto const spec = scene_spec_from_json(scene_json);
            auto const s = seed.value_or(scene_seed_from_json(scene_json, 1));
            write_scene(out_dir, spec, generate_scene(spec, s), s);
        },
        py::arg("scene_json"), py::arg("out_dir"), py::arg("seed") = py::none());

    m.def(
        "grid_search_motion",
        [](I64 const &t, U16 const &x, U16 const &y, I8 const &p, int width,
           int height, std::optional<std::int64_t> t_ref, double v_max,
           double v_step) {
            auto const ev = events_from_arrays(t, x, y, p);
            if (ev.empty())
                throw EmptyWindowError("no events");
            MotionSearchSpace space;
            space.vx = SearchAxis::spaced(-v_max, v_max, v_step);
            space.vy = SearchAxis::spaced(-v_max, v_max, v_step);
            Timestamp const ref =
                t_ref ? static_cast<Timestamp>(*t_ref)
                      : ev.front().t + (ev.back().t - ev.front().t) / 2;
            MotionSearchResult r;
            {
                py::gil_scoped_release release;
                r = grid_search_motion(ev, width, height, ref, space);
            }
            auto d = motion_dict(r.best);
            d["variance"] = r.best_variance;
            d["few_events"] = r.few_events;
            return d;
        },
        py::arg("t"), py::arg("x"), py::arg("y"), py::arg("p"), py::arg("width"),
        py::arg("height"), py::arg("t_ref") = py::none(), py::arg("v_max") = 40.0,
        py::arg("v_step") = 2.0,
        "Translational contrast-maximisation grid search.");

    m.def(
        "dct_sharpness",
        [](F64 const &image, int num_scales, int block) {
            if (image.ndim() != 2)
                throw InvalidArgument("image must be 2-D");
            auto r = image.unchecked<2>();
            ScalarField f(static_cast<int>(image.shape(1)),
                          static_cast<int>(image.shape(0)));
            for (py::ssize_t yy = 0; yy < image.shape(0); ++yy)
                for (py::ssize_t xx = 0; xx < image.shape(1); ++xx)
                    f(static_cast<int>(xx), static_cast<int>(yy)) = r(yy, xx);
            BlurOptions opt;
            opt.num_scales = num_scales;
            opt.block = block;
            auto const bm = dct_sharpness_map(f, opt);
            return py::make_tuple(field_to_array(bm.sharpness),
                                  field_to_array(bm.raw));
        },
        py::arg("image"), py::arg("num_scales") = 2, py::arg("block") = 16,
        "Normalised and raw DCT sharpness maps.");

    m.def(
        "iou",
        [](Bool const &a, Bool const &b) {
            return iou(mask_from_array(a), mask_from_array(b)).value;
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "score",
        [](std::string const &pred, std::string const &gt, double threshold) {
            DetectionConfig cfg;
            cfg.iou_threshold = threshold;
            auto const r = score_directories(pred, gt, cfg);
            py::dict d;
            d["detection_rate"] = r.rate;
            d["detected"] = r.detected;
            d["total"] = r.total;
            d["mean_iou"] = r.mean_iou;
            return d;
        },
        py::arg("pred"), py::arg("gt"), py::arg("iou_threshold") = 0.5,
        "Detection rate of window masks against ground truth.");

    m.def("default_config", [] { return to_ini(PipelineConfig{}); },
          "Canonical INI text of the default pipeline configuration.");

    m.def(
        "segment",
        [](std::string const &events, std::string const &config_ini,
           std::string const &out_dir, std::string const &flow_dir) {
            auto cfg = parse_pipeline_config(config_ini);
            cfg.output_dir = out_dir;
            if (!flow_dir.empty())
                cfg.flow_dir = flow_dir;
            cfg.validate();
            PipelineSummary s;
            {
                py::gil_scoped_release release;
                s = run_pipeline(events, cfg);
            }
            py::list windows;
            for (auto const &w : s.windows) {
                py::dict d;
                d["index"] = w.index;
                d["t_start"] = w.t_start;
                d["t_end"] = w.t_end;
                d["events"] = w.events;
                d["failed"] = w.failed;
                d["error"] = w.error;
                d["objects"] = w.objects;
                d["ego"] = motion_dict(w.ego);
                windows.append(d);
            }
            py::dict out;
            out["windows"] = windows;
            out["stage_ms"] = s.stage_ms;
            out["config_hash"] = s.config_hash;
            out["output_dir"] = s.output_dir;
            return out;
        },
        py::arg("events"), py::arg("config_ini"), py::arg("out_dir"),
        py::arg("flow_dir") = "",
        "Run the segmentation pipeline on an event file.");
}
