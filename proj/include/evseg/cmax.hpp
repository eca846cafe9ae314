// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/cmax.hpp
/// @brief Contrast maximisation: warp events along a motion hypothesis,
/// accumulate the image of warped events (IWE), score it by variance and
/// search a motion grid for the sharpest IWE.

#pragma once

#include "evseg/event.hpp"
#include "evseg/grid.hpp"
#include "evseg/motion.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace evseg {

/// Warp each event to `t_ref`: u' = u - D(u, t - t_ref), with D the motion
/// displacement (translation plus zoom/roll about the sensor centre) and the
/// time offset taken per event in seconds.
[[nodiscard]] std::vector<Point2> warp_events(std::span<Event const> events,
                                              MotionParams const &m,
                                              Timestamp t_ref, int width,
                                              int height);

[[nodiscard]] inline std::vector<Point2>
warp_events(EventWindow const &window, MotionParams const &m, Timestamp t_ref) {
    return warp_events(window.events, m, t_ref, window.width, window.height);
}

enum class IweMode {
    count,    ///< each event contributes +1
    polarity, ///< each event contributes its polarity
};

enum class SplatKind { bilinear, nearest };

/// Bilinear weights are quantised to 1/256 px so that accumulated masses are
/// exact dyadic rationals.
inline constexpr int kSubpixelSteps = 256;

struct IWE {
    ScalarField accumulation;
    std::size_t count = 0;      ///< events landing inside the image
    std::size_t dropped = 0;    ///< events outside [0, W-1] x [0, H-1]
    double dropped_mass = 0.0;  ///< |b_k| summed over dropped events
};

[[nodiscard]] IWE accumulate_iwe(std::span<Point2 const> warped,
                                 std::span<std::int8_t const> polarities,
                                 int height, int width,
                                 IweMode mode = IweMode::count,
                                 SplatKind splat = SplatKind::bilinear);

/// Convenience overload reading polarities from the events.
[[nodiscard]] IWE accumulate_iwe(std::span<Point2 const> warped,
                                 std::span<Event const> events, int height,
                                 int width, IweMode mode = IweMode::count,
                                 SplatKind splat = SplatKind::bilinear);

/// Population variance over all pixels.
[[nodiscard]] double contrast_variance(ScalarField const &field);
[[nodiscard]] inline double contrast_variance(IWE const &iwe) {
    return contrast_variance(iwe.accumulation);
}

/// One axis of the search grid: `steps` evenly spaced values from min to max
/// inclusive. A disabled axis is pinned to 0.
struct SearchAxis {
    double min = 0.0;
    double max = 0.0;
    int steps = 1;
    bool enabled = false;

    [[nodiscard]] static SearchAxis pinned() { return {}; }
    /// Axis covering [min, max] with spacing `step`.
    [[nodiscard]] static SearchAxis spaced(double min, double max, double step);

    [[nodiscard]] int size() const noexcept { return enabled ? steps : 1; }
    [[nodiscard]] double value(int i) const noexcept;
    [[nodiscard]] double spacing() const noexcept;
};

struct MotionSearchSpace {
    SearchAxis vx = SearchAxis::spaced(-40.0, 40.0, 2.0);
    SearchAxis vy = SearchAxis::spaced(-40.0, 40.0, 2.0);
    SearchAxis hz = SearchAxis::pinned();
    SearchAxis phi = SearchAxis::pinned();
    /// Reference time; defaults to the window midpoint.
    std::optional<Timestamp> t_ref;
    /// Re-grid at 1/10 spacing around the winner once.
    bool refine = false;

    [[nodiscard]] std::size_t candidate_count() const noexcept;
    void validate() const;
};

struct GridSearchOptions {
    IweMode mode = IweMode::count;
    SplatKind splat = SplatKind::bilinear;
    /// Below this many events the result carries a warning flag.
    std::size_t min_events = 30;
};

struct MotionSearchResult {
    MotionParams best;
    double best_variance = 0.0;
    /// Variance of every coarse candidate, vx fastest, then vy, hz, phi.
    std::vector<double> variance_grid;
    std::vector<MotionParams> candidates;
    bool few_events = false;
    std::size_t evaluated = 0;
};

/// Exhaustive search for the variance-maximising motion. Ties (relative
/// difference below 1e-12) prefer the smaller |v|, then the lexicographically
/// smaller (vx, vy, hz, phi).
[[nodiscard]] MotionSearchResult grid_search_motion(
    std::span<Event const> events, int width, int height, Timestamp t_ref,
    MotionSearchSpace const &space, GridSearchOptions const &opt = {});

/// Window overload; t_ref defaults to the window midpoint. Throws
/// EmptyWindowError on an empty window.
[[nodiscard]] MotionSearchResult grid_search_motion(
    EventWindow const &window, MotionSearchSpace const &space,
    GridSearchOptions const &opt = {});

/// CSV dump of a search grid: `vx,vy,hz,phi,variance` per candidate.
void write_variance_grid_csv(std::ostream &os, MotionSearchResult const &res);

} // namespace evseg
