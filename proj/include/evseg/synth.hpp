// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/synth.hpp
/// @brief Synthetic event scenes with ground-truth labels, masks and flow.
///
/// The scene is a piecewise-constant intensity function: a procedural
/// background moving with the ego motion plus occluding objects moving about
/// their own centres. Every change of a pixel's intensity level emits one
/// event at the (bisected) crossing time, with polarity the sign of the
/// change.

#pragma once

#include "evseg/event.hpp"
#include "evseg/event_io.hpp"
#include "evseg/features.hpp"
#include "evseg/grid.hpp"
#include "evseg/motion.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace evseg {

enum class ShapeKind { rectangle, disc, bar };

struct SceneObject {
    ShapeKind shape = ShapeKind::rectangle;
    /// Width and height; a disc uses width as its diameter.
    double width = 20.0;
    double height = 20.0;
    Point2 position; ///< centre at t = 0
    MotionParams motion; ///< about the object's own centre
    int contrast = 1;    ///< +1 brighter, -1 darker than the background
    /// Checkerboard cell size in px; 0 gives a uniform object.
    double texture_cell = 0.0;
};

struct SceneSpec {
    int width = 640;
    int height = 480;
    double duration = 1.0;       ///< seconds
    double frame_interval = 0.1; ///< seconds between ground-truth frames
    MotionParams ego;
    std::vector<SceneObject> objects;
    double noise_rate = 0.0; ///< events per pixel per second
    /// Random block texture cell size in px; 0 disables the background.
    double background_cell = 0.0;

    /// Throws InvalidArgument on degenerate specs.
    void validate() const;
};

struct SceneResult {
    EventStream stream;
    std::vector<std::uint16_t> labels; ///< 0 background/noise, k = object k-1
    std::vector<Timestamp> frame_times;
    std::vector<BinaryMask> masks; ///< union of object supports per frame
    std::vector<std::vector<BinaryMask>> object_masks; ///< [frame][object]
    std::vector<FlowField> flows;
    std::vector<MotionParams> object_motions;
    MotionParams ego;
};

[[nodiscard]] SceneResult generate_scene(SceneSpec const &spec,
                                         std::uint64_t seed);

/// Occupancy of every object at time t (seconds).
[[nodiscard]] std::vector<BinaryMask> object_supports(SceneSpec const &spec,
                                                      double t);

/// Gray-level rendering of the scene at time t (seconds): background texture
/// and objects as distinct intensity levels. `seed` must match the one used
/// for generate_scene so the background texture agrees.
[[nodiscard]] RgbImage render_scene(SceneSpec const &spec, std::uint64_t seed,
                                    double t);

/// Per-event labels paired with ground-truth motions (label 0 = ego).
[[nodiscard]] LabeledEventFile ground_truth_labeled(SceneResult const &scene);

[[nodiscard]] SceneSpec scene_spec_from_json(std::string const &text);
[[nodiscard]] std::string scene_spec_to_json(SceneSpec const &spec,
                                             std::uint64_t seed);
/// Reads `seed` from the JSON if present, else returns `fallback`.
[[nodiscard]] std::uint64_t scene_seed_from_json(std::string const &text,
                                                 std::uint64_t fallback);

/// Writes events.evs, gt_labels.evl, scene.json, masks/mask_NNNNNN.pgm,
/// flow/flow_NNNNNN.flw and gt/window_NNNNNN_obj_K.pgm (pixels touched by
/// the events of object K in window N, windows of frame_interval).
void write_scene(std::string const &out_dir, SceneSpec const &spec,
                 SceneResult const &scene, std::uint64_t seed);

} // namespace evseg
