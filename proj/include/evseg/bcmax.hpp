// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/bcmax.hpp
/// @brief Iterative per-object motion estimation and event labelling.
///
/// Each iteration finds the dominant motion of the still-unlabelled salient
/// events, builds their IWE under that motion, and labels the events whose
/// warped position falls on the sharp (motion-compensated) part of the IWE.
/// An iteration whose motion matches an already labelled object (within half
/// a grid step per axis) extends that object's label. The loop stops once
/// fewer than a fraction of the initial salient events remain.

#pragma once

#include "evseg/blur.hpp"
#include "evseg/cmax.hpp"
#include "evseg/event.hpp"
#include "evseg/event_io.hpp"

#include <string>
#include <vector>

namespace evseg {

struct BCMaxConfig {
    /// Stop when fewer than this fraction of the initial mask events remain.
    double termination_fraction = 0.10;
    int max_iterations = 10;
    MotionSearchSpace space;
    GridSearchOptions search;
    BlurOptions blur;
    int dilation_radius = 3;
    /// Gaussian smoothing of the IWE before blur detection (pixels).
    double iwe_sigma = 1.0;
    /// Minimum events for any motion estimate.
    std::size_t min_events = 30;

    void validate() const;
};

struct ObjectEstimate {
    std::uint16_t label = 0;
    MotionParams motion;
    std::size_t event_count = 0;
    double variance = 0.0;
};

struct BCMaxResult {
    std::vector<LabeledEvent> events; ///< same order as the window's events
    std::vector<ObjectEstimate> objects;
    MotionParams ego;
    int iterations = 0;
    std::size_t mask_events = 0;
    std::size_t residue = 0;
    bool terminated_by_fraction = false;
    std::vector<std::string> diagnostics;
};

struct EgoEstimate {
    MotionParams motion;
    bool warning = false;
    std::size_t events = 0;
};

/// Grid search over the events outside the salient mask. An empty complement
/// yields zero motion with the warning flag set.
[[nodiscard]] EgoEstimate estimate_ego_motion(EventWindow const &window,
                                              BinaryMask const &salient_mask,
                                              MotionSearchSpace const &space,
                                              GridSearchOptions const &opt = {});

[[nodiscard]] BCMaxResult bcmax_segment(EventWindow const &window,
                                        BinaryMask const &salient_mask,
                                        MotionParams const &ego,
                                        BCMaxConfig const &cfg = {});

/// Sharp-region mask of the IWE of `events` under `m`, in sensor
/// coordinates. Exposed for diagnostics and tests.
[[nodiscard]] BinaryMask compensated_sharp_region(
    std::span<Event const> events, int width, int height, Timestamp t_ref,
    MotionParams const &m, BCMaxConfig const &cfg);

} // namespace evseg
