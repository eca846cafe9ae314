// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

// evseg: batch motion segmentation of event streams.
//
//   evseg segment <events> --config <file> [--features-dir D] [--flow-dir D]
//                 [--builtin-features] [--out D] [--seed N]
//   evseg synth <scene.json> --out D
//   evseg score --pred D --gt D --iou-threshold T
//   evseg dump-variance-grid <events> [--config F] [--t-start US] [--t-end US]

#include "evseg/cmax.hpp"
#include "evseg/error.hpp"
#include "evseg/eval.hpp"
#include "evseg/event_io.hpp"
#include "evseg/pipeline.hpp"
#include "evseg/synth.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

std::string slurp(std::string const &path) {
    std::ifstream in(path);
    if (!in)
        throw evseg::IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SegmentArgs {
    std::string events;
    std::string config;
    std::string features_dir;
    std::string flow_dir;
    bool builtin = false;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

int run_segment(SegmentArgs const &a) {
    auto cfg = evseg::load_pipeline_config(a.config);
    if (!a.features_dir.empty()) {
        cfg.features_dir = a.features_dir;
        cfg.builtin_features = false;
    }
    if (a.builtin)
        cfg.builtin_features = true;
    if (!a.flow_dir.empty())
        cfg.flow_dir = a.flow_dir;
    if (!a.out.empty())
        cfg.output_dir = a.out;
    if (a.seed) {
        cfg.seed = *a.seed;
        cfg.ncut.seed = *a.seed;
    }
    if (a.workers)
        cfg.workers = *a.workers;
    cfg.validate();

    spdlog::info("segmenting {} (config hash {})", a.events,
                 evseg::config_hash(cfg));
    auto const sum = evseg::run_pipeline(a.events, cfg);
    for (auto const &w : sum.windows) {
        if (w.failed)
            spdlog::warn("window {} failed: {}", w.index, w.error);
        else
            spdlog::debug("window {}: {} events, {} objects", w.index,
                          w.events, w.objects);
    }
    for (auto const *stage : evseg::kStageNames)
        spdlog::info("stage {:<15} {:10.1f} ms", stage, sum.stage_ms.at(stage));
    spdlog::info("{} windows, {} failed, output in {}", sum.windows.size(),
                 sum.failed(), sum.output_dir);
    return 0;
}

int run_synth(std::string const &scene_path, std::string const &out,
              std::optional<std::uint64_t> seed_override) {
    auto const text = slurp(scene_path);
    auto const spec = evseg::scene_spec_from_json(text);
    auto const seed =
        seed_override.value_or(evseg::scene_seed_from_json(text, 1));
    auto const scene = evseg::generate_scene(spec, seed);
    evseg::write_scene(out, spec, scene, seed);
    spdlog::info("wrote {} events, {} frames to {}",
                 scene.stream.events.size(), scene.frame_times.size(), out);
    return 0;
}

int run_score(std::string const &pred, std::string const &gt,
              double threshold, std::string const &report) {
    evseg::DetectionConfig cfg;
    cfg.iou_threshold = threshold;
    auto const r = evseg::score_directories(pred, gt, cfg);
    std::cout << "detection_rate " << r.rate << "\n"
              << "detected " << r.detected << "\n"
              << "total " << r.total << "\n"
              << "mean_iou " << r.mean_iou << "\n";
    if (!report.empty()) {
        std::filesystem::create_directories(report);
        std::vector<evseg::ReportRow> rows{
            {"all", "detection_rate", r.rate},
            {"all", "detected", static_cast<double>(r.detected)},
            {"all", "total", static_cast<double>(r.total)},
            {"all", "mean_iou", r.mean_iou}};
        evseg::write_report_json(report + "/score.json", rows);
        evseg::write_report_csv(report + "/score.csv", rows);
    }
    return 0;
}

struct GridArgs {
    std::string events;
    std::string config;
    std::string out;
    std::optional<evseg::Timestamp> t_start;
    std::optional<evseg::Timestamp> t_end;
};

int run_dump_grid(GridArgs const &a) {
    evseg::PipelineConfig cfg;
    if (!a.config.empty())
        cfg = evseg::load_pipeline_config(a.config);
    auto const stream =
        evseg::read_events(a.events, cfg.csv_width, cfg.csv_height);
    evseg::EventWindow win;
    win.width = stream.width;
    win.height = stream.height;
    for (auto const &e : stream.events)
        if ((!a.t_start || e.t >= *a.t_start) && (!a.t_end || e.t < *a.t_end))
            win.events.push_back(e);
    if (win.events.empty())
        throw evseg::EmptyWindowError("no events in the requested range");
    win.t_start = a.t_start.value_or(win.events.front().t);
    win.t_end = a.t_end.value_or(win.events.back().t + 1);
    auto const res = evseg::grid_search_motion(win, cfg.bcmax.space,
                                               cfg.bcmax.search);
    if (a.out.empty()) {
        evseg::write_variance_grid_csv(std::cout, res);
    } else {
        std::ofstream os(a.out);
        evseg::write_variance_grid_csv(os, res);
        if (!os)
            throw evseg::IoError("cannot write " + a.out);
    }
    spdlog::info("best vx={} vy={} hz={} phi={} variance={}", res.best.vx,
                 res.best.vy, res.best.hz, res.best.phi, res.best_variance);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Event-camera motion segmentation"};
    app.require_subcommand(1);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

    SegmentArgs seg;
    auto *segment = app.add_subcommand("segment", "Segment an event stream");
    segment->add_option("events", seg.events, "Event file (.evs or .csv)")
        ->required()
        ->check(CLI::ExistingFile);
    segment->add_option("--config", seg.config, "Pipeline INI config")
        ->required()
        ->check(CLI::ExistingFile);
    segment->add_option("--features-dir", seg.features_dir,
                        "Directory of frame_NNNNNN.ftg feature grids");
    segment->add_option("--flow-dir", seg.flow_dir,
                        "Directory of flow_NNNNNN.flw flow fields");
    segment->add_flag("--builtin-features", seg.builtin,
                      "Use the builtin patch descriptor");
    segment->add_option("--out", seg.out, "Output directory");
    segment->add_option("--seed", seg.seed, "Random seed");
    segment->add_option("--workers", seg.workers, "Worker threads")
        ->check(CLI::PositiveNumber);

    std::string scene_path, synth_out;
    std::optional<std::uint64_t> synth_seed;
    auto *synth = app.add_subcommand("synth", "Generate a synthetic scene");
    synth->add_option("scene", scene_path, "Scene description (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Override the scene seed");

    std::string pred_dir, gt_dir, report_dir;
    double iou_threshold = 0.5;
    auto *score = app.add_subcommand("score", "Detection rate against ground truth");
    score->add_option("--pred", pred_dir, "Predicted window masks")
        ->required()
        ->check(CLI::ExistingDirectory);
    score->add_option("--gt", gt_dir, "Ground-truth window masks")
        ->required()
        ->check(CLI::ExistingDirectory);
    score->add_option("--iou-threshold", iou_threshold, "Match threshold")
        ->check(CLI::Range(0.0, 1.0));
    score->add_option("--report", report_dir,
                      "Write score.json and score.csv here");

    GridArgs grid;
    auto *dump = app.add_subcommand("dump-variance-grid",
                                    "Print the CMax variance over the search grid");
    dump->add_option("events", grid.events, "Event file")
        ->required()
        ->check(CLI::ExistingFile);
    dump->add_option("--config", grid.config, "Pipeline INI config (search)")
        ->check(CLI::ExistingFile);
    dump->add_option("--t-start", grid.t_start, "First timestamp (us)");
    dump->add_option("--t-end", grid.t_end, "End timestamp (us, exclusive)");
    dump->add_option("--out", grid.out, "CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    spdlog::set_level(verbose  ? spdlog::level::debug
                      : quiet ? spdlog::level::warn
                              : spdlog::level::info);

    try {
        if (*segment)
            return run_segment(seg);
        if (*synth)
            return run_synth(scene_path, synth_out, synth_seed);
        if (*score)
            return run_score(pred_dir, gt_dir, iou_threshold, report_dir);
        if (*dump)
            return run_dump_grid(grid);
    } catch (evseg::ConfigError const &e) {
        spdlog::error("config error: {}", e.what());
        return kExitConfig;
    } catch (std::exception const &e) {
        spdlog::error("{}", e.what());
        return kExitFailure;
    }
    return kExitFailure;
}
