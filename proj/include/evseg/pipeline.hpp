// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/pipeline.hpp
/// @brief End-to-end per-window segmentation: time surface, patch features,
/// NCut saliency, mask refinement, ego-motion and B-CMax labelling.

#pragma once

#include "evseg/bcmax.hpp"
#include "evseg/features.hpp"
#include "evseg/refine.hpp"
#include "evseg/saliency.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evseg {

struct PipelineConfig {
    // [window]
    Timestamp delta_t_us = 10000;
    std::optional<Timestamp> origin_us; ///< unset: first event timestamp
    // [input] geometry for CSV streams
    int csv_width = 0;
    int csv_height = 0;
    // [time_surface]
    double tau_e = 0.1;
    // [features]
    int patch_size = 16;
    int orientation_bins = 8;
    bool builtin_features = true;
    std::string features_dir;
    std::string flow_dir;
    /// Frames spanned by each external flow file; flow is divided by it.
    double flow_gap = 1.0;
    // [graph]
    double tau = kDefaultGraphTau;
    double epsilon = kDefaultGraphEpsilon;
    // [ncut]
    NCutOptions ncut;
    // [dmr]
    bool dmr_enabled = true;
    DMRConfig dmr;
    // [mask]
    int mask_dilation = 0;
    // [bcmax] (search space shared with the ego estimate)
    BCMaxConfig bcmax;
    // [run]
    int workers = 1; ///< threads processing windows
    std::uint64_t seed = 1;
    // [output]
    std::string output_dir = "evseg_out";

    void validate() const;
};

[[nodiscard]] PipelineConfig load_pipeline_config(std::string const &path);
[[nodiscard]] PipelineConfig parse_pipeline_config(std::string const &text);
/// Canonical INI text; parse_pipeline_config(to_ini(c)) reproduces c.
[[nodiscard]] std::string to_ini(PipelineConfig const &cfg);
/// FNV-1a 64 of the canonical INI text, as 16 hex digits.
[[nodiscard]] std::string config_hash(PipelineConfig const &cfg);

/// Stage names in manifest order.
inline constexpr std::array<char const *, 7> kStageNames = {
    "time_surface", "flow",  "frame_features", "flow_features",
    "graph",        "dmr",   "bcmax"};

struct WindowReport {
    std::size_t index = 0;
    Timestamp t_start = 0;
    Timestamp t_end = 0;
    std::size_t events = 0;
    bool failed = false;
    std::string error;
    std::size_t objects = 0;
    int iterations = 0;
    MotionParams ego;
};

struct PipelineSummary {
    std::vector<WindowReport> windows;
    std::map<std::string, double> stage_ms;
    std::string config_hash;
    std::string output_dir;
    [[nodiscard]] std::size_t failed() const;
};

/// Runs every window of the stream and writes, under cfg.output_dir:
/// labels/window_N.evl (+ .json sidecar), masks/mask_N.pgm,
/// objects/window_N_obj_K.pgm, iwe/window_N_obj_K.png, report.json,
/// report.csv and manifest.json. Missing external feature or flow files are
/// reported as ConfigError before any window is processed; other per-window
/// failures are recorded and the run continues.
PipelineSummary run_pipeline(EventStream const &stream,
                             PipelineConfig const &cfg);

/// Reads the stream (.evs or .csv) and runs the pipeline.
PipelineSummary run_pipeline(std::string const &events_path,
                             PipelineConfig const &cfg);

} // namespace evseg
