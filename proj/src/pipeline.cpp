// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/pipeline.hpp"

#include "evseg/error.hpp"
#include "evseg/eval.hpp"
#include "evseg/event_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <type_traits>

namespace evseg {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::ordered_json;

void PipelineConfig::validate() const {
    if (delta_t_us == 0)
        throw ConfigError("window.delta_t_us must be positive");
    if (!(tau_e > 0.0))
        throw ConfigError("time_surface.tau_e must be positive");
    if (patch_size < 1)
        throw ConfigError("features.patch_size must be >= 1");
    if (orientation_bins < 1)
        throw ConfigError("features.orientation_bins must be >= 1");
    if (!(flow_gap > 0.0))
        throw ConfigError("features.flow_gap must be positive");
    if (!(tau >= -1.0 && tau <= 1.0))
        throw ConfigError("graph.tau must lie in [-1, 1]");
    if (!(epsilon > 0.0) || epsilon >= 1.0)
        throw ConfigError("graph.epsilon must lie in (0, 1)");
    if (mask_dilation < 0)
        throw ConfigError("mask.dilation must be >= 0");
    if (workers < 1)
        throw ConfigError("run.workers must be >= 1");
    if (output_dir.empty())
        throw ConfigError("output.dir must not be empty");
    try {
        dmr.validate();
        bcmax.validate();
    } catch (InvalidArgument const &e) {
        throw ConfigError(e.what());
    }
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    auto const r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

char const *solver_name(EigenSolverKind k) {
    switch (k) {
    case EigenSolverKind::dense:
        return "dense";
    case EigenSolverKind::lanczos:
        return "lanczos";
    default:
        return "auto";
    }
}

EigenSolverKind parse_solver(std::string const &s) {
    if (s == "auto")
        return EigenSolverKind::automatic;
    if (s == "dense")
        return EigenSolverKind::dense;
    if (s == "lanczos")
        return EigenSolverKind::lanczos;
    throw ConfigError("ncut.solver must be auto, dense or lanczos: " + s);
}

template <typename T>
T get(pt::ptree const &tree, std::string const &key, T fallback) {
    auto node = tree.get_child_optional(pt::ptree::path_type(key, '.'));
    if (!node)
        return fallback;
    if constexpr (std::is_unsigned_v<T>) {
        if (node->data().find('-') != std::string::npos)
            throw ConfigError("bad value for " + key + ": " + node->data());
    }
    try {
        return node->get_value<T>();
    } catch (pt::ptree_error const &) {
        throw ConfigError("bad value for " + key + ": " + node->data());
    }
}

bool get_bool(pt::ptree const &tree, std::string const &key, bool fallback) {
    auto const s = get<std::string>(tree, key, fallback ? "true" : "false");
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "no" || s == "off")
        return false;
    throw ConfigError("bad boolean for " + key + ": " + s);
}

SearchAxis get_axis(pt::ptree const &tree, std::string const &name,
                    SearchAxis fallback) {
    std::string const p = "search." + name;
    SearchAxis a;
    a.enabled = get_bool(tree, p + "_enabled", fallback.enabled);
    a.min = get<double>(tree, p + "_min", fallback.min);
    a.max = get<double>(tree, p + "_max", fallback.max);
    if (auto step = tree.get_optional<double>(
            pt::ptree::path_type(p + "_step", '.'))) {
        if (!a.enabled)
            return SearchAxis::pinned();
        try {
            return SearchAxis::spaced(a.min, a.max, *step);
        } catch (InvalidArgument const &e) {
            throw ConfigError(name + ": " + e.what());
        }
    }
    a.steps = get<int>(tree, p + "_steps", fallback.steps);
    if (!a.enabled)
        return SearchAxis::pinned();
    return a;
}

void put_axis(std::ostream &os, std::string const &name, SearchAxis const &a) {
    os << name << "_enabled = " << (a.enabled ? "true" : "false") << '\n'
       << name << "_min = " << fmt_double(a.min) << '\n'
       << name << "_max = " << fmt_double(a.max) << '\n'
       << name << "_steps = " << a.steps << '\n';
}

IweMode parse_mode(std::string const &s) {
    if (s == "count")
        return IweMode::count;
    if (s == "polarity")
        return IweMode::polarity;
    throw ConfigError("search.iwe_mode must be count or polarity: " + s);
}

SplatKind parse_splat(std::string const &s) {
    if (s == "bilinear")
        return SplatKind::bilinear;
    if (s == "nearest")
        return SplatKind::nearest;
    throw ConfigError("search.splat must be bilinear or nearest: " + s);
}

} // namespace

PipelineConfig parse_pipeline_config(std::string const &text) {
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::read_ini(is, tree);
    } catch (pt::ptree_error const &e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    PipelineConfig c;
    c.delta_t_us = get<Timestamp>(tree, "window.delta_t_us", c.delta_t_us);
    auto const origin = get<std::string>(tree, "window.origin_us", "first");
    if (origin != "first") {
        try {
            std::size_t pos = 0;
            c.origin_us = std::stoull(origin, &pos);
            if (pos != origin.size())
                throw std::invalid_argument(origin);
        } catch (std::exception const &) {
            throw ConfigError("window.origin_us must be 'first' or an integer");
        }
    }
    c.csv_width = get<int>(tree, "input.width", c.csv_width);
    c.csv_height = get<int>(tree, "input.height", c.csv_height);
    c.tau_e = get<double>(tree, "time_surface.tau_e", c.tau_e);
    c.patch_size = get<int>(tree, "features.patch_size", c.patch_size);
    c.orientation_bins =
        get<int>(tree, "features.orientation_bins", c.orientation_bins);
    c.builtin_features =
        get_bool(tree, "features.builtin", c.builtin_features);
    c.features_dir = get<std::string>(tree, "features.dir", c.features_dir);
    c.flow_dir = get<std::string>(tree, "features.flow_dir", c.flow_dir);
    c.flow_gap = get<double>(tree, "features.flow_gap", c.flow_gap);
    c.tau = get<double>(tree, "graph.tau", c.tau);
    c.epsilon = get<double>(tree, "graph.epsilon", c.epsilon);
    c.ncut.solver = parse_solver(
        get<std::string>(tree, "ncut.solver", solver_name(c.ncut.solver)));
    c.ncut.dense_max = get<int>(tree, "ncut.dense_max", c.ncut.dense_max);
    c.ncut.tolerance = get<double>(tree, "ncut.tolerance", c.ncut.tolerance);
    c.ncut.max_restarts =
        get<int>(tree, "ncut.max_restarts", c.ncut.max_restarts);
    c.ncut.krylov_dim = get<int>(tree, "ncut.krylov_dim", c.ncut.krylov_dim);
    c.dmr_enabled = get_bool(tree, "dmr.enabled", c.dmr_enabled);
    c.dmr.window = get<int>(tree, "dmr.window", c.dmr.window);
    c.dmr.top_k = get<int>(tree, "dmr.top_k", c.dmr.top_k);
    c.dmr.radius = get<int>(tree, "dmr.radius", c.dmr.radius);
    c.dmr.theta = get<double>(tree, "dmr.theta", c.dmr.theta);
    c.dmr.temperature = get<double>(tree, "dmr.temperature", c.dmr.temperature);
    c.mask_dilation = get<int>(tree, "mask.dilation", c.mask_dilation);

    auto &s = c.bcmax.space;
    s.vx = get_axis(tree, "vx", s.vx);
    s.vy = get_axis(tree, "vy", s.vy);
    s.hz = get_axis(tree, "hz", s.hz);
    s.phi = get_axis(tree, "phi", s.phi);
    s.refine = get_bool(tree, "search.refine", s.refine);
    c.bcmax.search.mode =
        parse_mode(get<std::string>(tree, "search.iwe_mode", "count"));
    c.bcmax.search.splat =
        parse_splat(get<std::string>(tree, "search.splat", "bilinear"));

    auto &b = c.bcmax;
    b.termination_fraction =
        get<double>(tree, "bcmax.termination_fraction", b.termination_fraction);
    b.max_iterations = get<int>(tree, "bcmax.max_iterations", b.max_iterations);
    b.dilation_radius =
        get<int>(tree, "bcmax.dilation_radius", b.dilation_radius);
    b.iwe_sigma = get<double>(tree, "bcmax.iwe_sigma", b.iwe_sigma);
    b.min_events = get<std::size_t>(tree, "bcmax.min_events", b.min_events);
    b.search.min_events = b.min_events;
    b.blur.num_scales = get<int>(tree, "blur.num_scales", b.blur.num_scales);
    b.blur.block = get<int>(tree, "blur.block", b.blur.block);
    b.blur.stride = get<int>(tree, "blur.stride", b.blur.stride);
    b.blur.downsample = get_bool(tree, "blur.downsample", b.blur.downsample);

    c.workers = get<int>(tree, "run.workers", c.workers);
    c.seed = get<std::uint64_t>(tree, "run.seed", c.seed);
    c.ncut.seed = c.seed;
    c.output_dir = get<std::string>(tree, "output.dir", c.output_dir);
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(std::string const &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pipeline_config(ss.str());
}

std::string to_ini(PipelineConfig const &c) {
    std::ostringstream os;
    os << "[window]\ndelta_t_us = " << c.delta_t_us << "\norigin_us = "
       << (c.origin_us ? std::to_string(*c.origin_us) : "first") << "\n\n";
    os << "[input]\nwidth = " << c.csv_width << "\nheight = " << c.csv_height
       << "\n\n";
    os << "[time_surface]\ntau_e = " << fmt_double(c.tau_e) << "\n\n";
    os << "[features]\npatch_size = " << c.patch_size
       << "\norientation_bins = " << c.orientation_bins
       << "\nbuiltin = " << (c.builtin_features ? "true" : "false")
       << "\ndir = " << c.features_dir << "\nflow_dir = " << c.flow_dir
       << "\nflow_gap = " << fmt_double(c.flow_gap) << "\n\n";
    os << "[graph]\ntau = " << fmt_double(c.tau)
       << "\nepsilon = " << fmt_double(c.epsilon) << "\n\n";
    os << "[ncut]\nsolver = " << solver_name(c.ncut.solver)
       << "\ndense_max = " << c.ncut.dense_max
       << "\ntolerance = " << fmt_double(c.ncut.tolerance)
       << "\nmax_restarts = " << c.ncut.max_restarts
       << "\nkrylov_dim = " << c.ncut.krylov_dim << "\n\n";
    os << "[dmr]\nenabled = " << (c.dmr_enabled ? "true" : "false")
       << "\nwindow = " << c.dmr.window << "\ntop_k = " << c.dmr.top_k
       << "\nradius = " << c.dmr.radius
       << "\ntheta = " << fmt_double(c.dmr.theta)
       << "\ntemperature = " << fmt_double(c.dmr.temperature) << "\n\n";
    os << "[mask]\ndilation = " << c.mask_dilation << "\n\n";
    auto const &s = c.bcmax.space;
    os << "[search]\n";
    put_axis(os, "vx", s.vx);
    put_axis(os, "vy", s.vy);
    put_axis(os, "hz", s.hz);
    put_axis(os, "phi", s.phi);
    os << "refine = " << (s.refine ? "true" : "false") << "\niwe_mode = "
       << (c.bcmax.search.mode == IweMode::count ? "count" : "polarity")
       << "\nsplat = "
       << (c.bcmax.search.splat == SplatKind::bilinear ? "bilinear"
                                                         : "nearest")
       << "\n\n";
    auto const &b = c.bcmax;
    os << "[bcmax]\ntermination_fraction = "
       << fmt_double(b.termination_fraction)
       << "\nmax_iterations = " << b.max_iterations
       << "\ndilation_radius = " << b.dilation_radius
       << "\niwe_sigma = " << fmt_double(b.iwe_sigma)
       << "\nmin_events = " << b.min_events << "\n\n";
    os << "[blur]\nnum_scales = " << b.blur.num_scales
       << "\nblock = " << b.blur.block << "\nstride = " << b.blur.stride
       << "\ndownsample = " << (b.blur.downsample ? "true" : "false")
       << "\n\n";
    os << "[run]\nworkers = " << c.workers << "\nseed = " << c.seed
       << "\n\n";
    os << "[output]\ndir = " << c.output_dir << "\n";
    return os.str();
}

std::string config_hash(PipelineConfig const &cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_ini(cfg)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

std::size_t PipelineSummary::failed() const {
    return static_cast<std::size_t>(
        std::count_if(windows.begin(), windows.end(),
                      [](WindowReport const &w) { return w.failed; }));
}

namespace {

enum Stage : std::size_t {
    kTimeSurface,
    kFlow,
    kFrameFeatures,
    kFlowFeatures,
    kGraph,
    kDmr,
    kBcmax,
};

using Clock = std::chrono::steady_clock;

class StageTimer {
  public:
    explicit StageTimer(double &sink) : sink_(sink), start_(Clock::now()) {}
    ~StageTimer() {
        sink_ += std::chrono::duration<double, std::milli>(Clock::now() -
                                                           start_)
                     .count();
    }
    StageTimer(StageTimer const &) = delete;
    StageTimer &operator=(StageTimer const &) = delete;

  private:
    double &sink_;
    Clock::time_point start_;
};

std::string numbered(char const *pattern, std::size_t i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, pattern, i);
    return buf;
}

std::string feature_path(PipelineConfig const &cfg, std::size_t i) {
    return (fs::path(cfg.features_dir) / numbered("frame_%06zu.ftg", i))
        .string();
}

std::string flow_path(PipelineConfig const &cfg, std::size_t i) {
    return (fs::path(cfg.flow_dir) / numbered("flow_%06zu.flw", i)).string();
}

json motion_json(MotionParams const &m) {
    return json{{"vx", m.vx}, {"vy", m.vy}, {"hz", m.hz}, {"phi", m.phi}};
}

// Runs body(i) for i in [0, n) on `workers` threads; the first exception
// escaping a body is rethrown after all threads join.
template <typename F> void parallel_for(std::size_t n, int workers, F body) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    auto const count =
        std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t w = 0; w < count; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    for (auto &t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

struct WindowState {
    WindowReport report;
    std::array<double, kStageNames.size()> ms{};
    PatchFeatureGrid features;
    bool has_features = false;
    BinaryMask coarse;
    bool coarse_valid = false;
    BinaryMask refined;
    std::vector<std::string> notes;
};

void saliency_stage(EventWindow const &win, std::size_t index,
                    PipelineConfig const &cfg, WindowState &st) {
    TimeSurface ts;
    RgbImage frame;
    {
        StageTimer t(st.ms[kTimeSurface]);
        ts = build_time_surface(win, cfg.tau_e, win.t_end);
        frame = render_frame(ts);
    }
    FlowField flow;
    bool const use_flow = !cfg.flow_dir.empty();
    if (use_flow) {
        StageTimer t(st.ms[kFlow]);
        flow = load_flow(flow_path(cfg, index));
        if (flow.width() != win.width || flow.height() != win.height)
            throw DimensionError("flow field does not match the sensor size");
        if (cfg.flow_gap != 1.0) {
            auto const inv = static_cast<float>(1.0 / cfg.flow_gap);
            for (auto &v : flow.u.data())
                v *= inv;
            for (auto &v : flow.v.data())
                v *= inv;
        }
    }
    {
        StageTimer t(st.ms[kFrameFeatures]);
        st.features = cfg.builtin_features
                          ? builtin_patch_descriptor(frame, cfg.patch_size,
                                                     cfg.orientation_bins)
                          : load_feature_grid(feature_path(cfg, index));
        auto const dims =
            patch_grid_dims(win.height, win.width, st.features.patch_size());
        if (dims.rows != st.features.rows() || dims.cols != st.features.cols())
            throw DimensionError("feature grid does not match the sensor size");
        st.has_features = true;
    }
    PatchFeatureGrid flow_feats;
    if (use_flow) {
        StageTimer t(st.ms[kFlowFeatures]);
        flow_feats = flow_features(flow, st.features.patch_size());
    }

    int const P = st.features.patch_size();
    st.coarse = BinaryMask(win.width, win.height);
    if (win.events.empty()) {
        st.notes.push_back("no events; saliency skipped");
        return;
    }
    StageTimer t(st.ms[kGraph]);
    auto const w_img = cosine_similarity_matrix(st.features);
    SimilarityGraph graph =
        use_flow ? build_graph(w_img.values,
                               cosine_similarity_matrix(flow_feats).values,
                               cfg.tau, cfg.epsilon)
                 : build_graph(w_img.values, cfg.tau, cfg.epsilon);
    try {
        auto const res = ncut_bipartition(graph, cfg.ncut);
        st.coarse = mask_from_partition(res, P, win.height, win.width);
        st.coarse_valid = true;
    } catch (DegenerateGraphError const &e) {
        st.notes.push_back(std::string("saliency: ") + e.what());
    } catch (ConvergenceError const &e) {
        st.notes.push_back(std::string("saliency: ") + e.what());
    }
}

void refine_masks(std::vector<WindowState> &states, PipelineConfig const &cfg,
                  double &ms) {
    StageTimer t(ms);
    std::size_t i = 0;
    while (i < states.size()) {
        if (!states[i].has_features) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < states.size() && states[j].has_features)
            ++j;
        // Windows [i, j) form a run with features.
        MaskSequence seq;
        std::vector<PatchFeatureGrid> feats;
        bool any_valid = false;
        for (std::size_t k = i; k < j; ++k) {
            seq.masks.push_back(states[k].coarse);
            seq.valid.push_back(states[k].coarse_valid ? 1 : 0);
            feats.push_back(states[k].features);
            any_valid = any_valid || states[k].coarse_valid;
        }
        if (cfg.dmr_enabled && any_valid) {
            auto const out = dynamic_mask_refinement(seq, feats, cfg.dmr);
            for (std::size_t k = i; k < j; ++k)
                states[k].refined = out.masks[k - i];
        } else {
            for (std::size_t k = i; k < j; ++k)
                states[k].refined = states[k].coarse;
        }
        i = j;
    }
}

void write_window_outputs(fs::path const &out, EventWindow const &win,
                          std::size_t index, BinaryMask const &mask,
                          BCMaxResult const &res, WindowState const &st) {
    write_pgm_mask((out / "masks" / numbered("mask_%06zu.pgm", index)).string(),
                   mask);

    LabeledEventFile file;
    file.width = win.width;
    file.height = win.height;
    file.events = res.events;
    file.motions[0] = res.ego;
    for (auto const &o : res.objects)
        file.motions[o.label] = o.motion;
    write_labeled_events(
        (out / "labels" / numbered("window_%06zu.evl", index)).string(), file);

    std::map<std::uint16_t, std::vector<Event>> by_label;
    for (auto const &le : res.events)
        if (le.label != 0)
            by_label[le.label].push_back(le.event);
    auto const masks = event_label_masks(res.events, win.width, win.height);
    Timestamp const t_ref = win.midpoint();

    json objects = json::array();
    for (auto const &o : res.objects) {
        auto const suffix = numbered("window_%06zu", index) + "_obj_" +
                            std::to_string(o.label);
        if (auto it = masks.find(o.label); it != masks.end())
            write_pgm_mask((out / "objects" / (suffix + ".pgm")).string(),
                           it->second);
        auto const &evs = by_label[o.label];
        auto const warped =
            warp_events(evs, o.motion, t_ref, win.width, win.height);
        auto const iwe = accumulate_iwe(warped, evs, win.height, win.width);
        write_png_scaled((out / "iwe" / (suffix + ".png")).string(),
                         iwe.accumulation);
        objects.push_back({{"label", o.label},
                           {"motion", motion_json(o.motion)},
                           {"events", o.event_count},
                           {"variance", o.variance}});
    }

    json side{{"window", index},
              {"t_start_us", win.t_start},
              {"t_end_us", win.t_end},
              {"events", win.events.size()},
              {"mask_pixels", count_set(mask)},
              {"mask_events", res.mask_events},
              {"residue", res.residue},
              {"iterations", res.iterations},
              {"terminated_by_fraction", res.terminated_by_fraction},
              {"ego", motion_json(res.ego)},
              {"objects", objects},
              {"diagnostics", res.diagnostics},
              {"notes", st.notes}};
    std::ofstream os(out / "labels" / numbered("window_%06zu.json", index));
    os << side.dump(2) << '\n';
    if (!os)
        throw IoError("cannot write window sidecar");
}

void motion_stage(EventWindow const &win, std::size_t index,
                  PipelineConfig const &cfg, fs::path const &out,
                  WindowState &st) {
    StageTimer t(st.ms[kBcmax]);
    auto mask = st.refined.empty() ? BinaryMask(win.width, win.height)
                                   : st.refined;
    if (cfg.mask_dilation > 0)
        mask = dilate_disc(mask, cfg.mask_dilation);

    BCMaxResult res;
    if (win.events.empty()) {
        res.events.clear();
    } else {
        auto const ego =
            estimate_ego_motion(win, mask, cfg.bcmax.space, cfg.bcmax.search);
        if (ego.warning)
            st.notes.push_back("ego estimate from " +
                               std::to_string(ego.events) + " events");
        res = bcmax_segment(win, mask, ego.motion, cfg.bcmax);
    }
    st.report.ego = res.ego;
    st.report.objects = res.objects.size();
    st.report.iterations = res.iterations;
    write_window_outputs(out, win, index, mask, res, st);
}

void check_external_inputs(PipelineConfig const &cfg, std::size_t windows) {
    if (!cfg.builtin_features && cfg.features_dir.empty())
        throw ConfigError(
            "builtin features disabled but no features directory given");
    for (std::size_t i = 0; i < windows; ++i) {
        if (!cfg.builtin_features && !fs::is_regular_file(feature_path(cfg, i)))
            throw ConfigError("missing feature file: " + feature_path(cfg, i));
        if (!cfg.flow_dir.empty() && !fs::is_regular_file(flow_path(cfg, i)))
            throw ConfigError("missing flow file: " + flow_path(cfg, i));
    }
}

void write_manifest(fs::path const &out, PipelineConfig const &cfg,
                    PipelineSummary const &sum,
                    std::vector<WindowState> const &states) {
    json stages = json::object();
    for (auto const *name : kStageNames)
        stages[name] = sum.stage_ms.at(name);
    json windows = json::array();
    for (auto const &s : states) {
        json w{{"window", s.report.index}, {"failed", s.report.failed}};
        if (s.report.failed)
            w["error"] = s.report.error;
        json ms = json::object();
        for (std::size_t k = 0; k < kStageNames.size(); ++k)
            ms[kStageNames[k]] = s.ms[k];
        w["stage_ms"] = ms;
        windows.push_back(w);
    }
    json m{{"config_hash", sum.config_hash},
           {"config", to_ini(cfg)},
           {"seed", cfg.seed},
           {"window_count", sum.windows.size()},
           {"failed_windows", sum.failed()},
           {"stage_ms", stages},
           {"windows", windows}};
    std::ofstream os(out / "manifest.json");
    os << m.dump(2) << '\n';
    if (!os)
        throw IoError("cannot write manifest");
}

void write_reports(fs::path const &out, PipelineSummary const &sum) {
    std::vector<ReportRow> rows;
    for (auto const &w : sum.windows) {
        auto const seq = numbered("window_%06zu", w.index);
        rows.push_back({seq, "events", static_cast<double>(w.events)});
        rows.push_back({seq, "failed", w.failed ? 1.0 : 0.0});
        rows.push_back({seq, "objects", static_cast<double>(w.objects)});
        rows.push_back({seq, "iterations", static_cast<double>(w.iterations)});
        rows.push_back({seq, "ego_vx", w.ego.vx});
        rows.push_back({seq, "ego_vy", w.ego.vy});
    }
    write_report_json((out / "report.json").string(), rows);
    write_report_csv((out / "report.csv").string(), rows);
}

} // namespace

PipelineSummary run_pipeline(EventStream const &stream,
                             PipelineConfig const &cfg) {
    cfg.validate();
    require_sorted(stream.events);
    require_in_bounds(stream.events, stream.width, stream.height);

    std::vector<EventWindow> windows;
    if (!stream.events.empty()) {
        Timestamp const origin =
            cfg.origin_us.value_or(stream.events.front().t);
        windows = slice_windows_from(stream.events, origin, cfg.delta_t_us,
                                     stream.width, stream.height);
    }
    check_external_inputs(cfg, windows.size());

    fs::path const out(cfg.output_dir);
    for (auto const *sub : {"labels", "masks", "objects", "iwe"})
        fs::create_directories(out / sub);

    std::vector<WindowState> states(windows.size());
    auto const fail = [](WindowState &st, std::exception const &e) {
        st.report.failed = true;
        st.report.error = e.what();
    };

    parallel_for(windows.size(), cfg.workers, [&](std::size_t i) {
        auto &st = states[i];
        st.report.index = i;
        st.report.t_start = windows[i].t_start;
        st.report.t_end = windows[i].t_end;
        st.report.events = windows[i].events.size();
        try {
            saliency_stage(windows[i], i, cfg, st);
        } catch (std::exception const &e) {
            fail(st, e);
        }
    });

    double dmr_ms = 0.0;
    refine_masks(states, cfg, dmr_ms);

    parallel_for(windows.size(), cfg.workers, [&](std::size_t i) {
        auto &st = states[i];
        if (st.report.failed)
            return;
        try {
            motion_stage(windows[i], i, cfg, out, st);
        } catch (std::exception const &e) {
            fail(st, e);
        }
    });

    PipelineSummary sum;
    sum.config_hash = config_hash(cfg);
    sum.output_dir = out.string();
    for (auto const *name : kStageNames)
        sum.stage_ms[name] = 0.0;
    for (auto const &st : states) {
        sum.windows.push_back(st.report);
        for (std::size_t k = 0; k < kStageNames.size(); ++k)
            sum.stage_ms[kStageNames[k]] += st.ms[k];
    }
    sum.stage_ms[kStageNames[kDmr]] += dmr_ms;

    write_reports(out, sum);
    write_manifest(out, cfg, sum, states);
    return sum;
}

PipelineSummary run_pipeline(std::string const &events_path,
                             PipelineConfig const &cfg) {
    cfg.validate();
    auto const stream =
        read_events(events_path, cfg.csv_width, cfg.csv_height);
    return run_pipeline(stream, cfg);
}

} // namespace evseg
