// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/event.hpp
/// @brief Event stream representation, fixed-duration windowing and the
/// linear-decay time surface.

#pragma once

#include "evseg/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace evseg {

/// Microsecond timestamp.
using Timestamp = std::uint64_t;

/// One sensor sample. Polarity is -1 or +1; files using {0, 1} are mapped at
/// ingestion.
struct Event {
    Timestamp t = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t polarity = 1;

    friend bool operator==(Event const &, Event const &) = default;
};

/// A sorted event sequence with the sensor geometry it was recorded on.
struct EventStream {
    int width = 0;
    int height = 0;
    std::vector<Event> events;
};

/// Events with t_start <= t < t_end, sorted by t.
struct EventWindow {
    std::vector<Event> events;
    Timestamp t_start = 0;
    Timestamp t_end = 0;
    int width = 0;
    int height = 0;

    [[nodiscard]] Timestamp duration() const noexcept {
        return t_end - t_start;
    }
    [[nodiscard]] Timestamp midpoint() const noexcept {
        return t_start + (t_end - t_start) / 2;
    }
};

/// Throws UnsortedStreamError naming the first offending index.
void require_sorted(std::span<Event const> events);

/// Throws InvalidArgument if any event lies outside width x height or has a
/// polarity other than +-1.
void require_in_bounds(std::span<Event const> events, int width, int height);

/// Tile [t_first, t_last] with windows of `delta_t` microseconds. Every event
/// lands in exactly one window; windows without events are still emitted so
/// that window index maps linearly to time.
[[nodiscard]] std::vector<EventWindow>
slice_windows(std::span<Event const> events, Timestamp delta_t, int width,
              int height);

/// As above but tiling from `origin`, which must not exceed the first
/// timestamp.
[[nodiscard]] std::vector<EventWindow>
slice_windows_from(std::span<Event const> events, Timestamp origin,
                   Timestamp delta_t, int width, int height);

[[nodiscard]] inline std::vector<EventWindow>
slice_windows(EventStream const &stream, Timestamp delta_t) {
    return slice_windows(stream.events, delta_t, stream.width, stream.height);
}

struct TimeSurface {
    ScalarField values;
    double tau_e = 0.1;
    Timestamp t_query = 0;
};

/// Each pixel holds P * (1 + (T - t_query) / (2 tau_e)) for its most recent
/// event (timestamp T, polarity P). Ages beyond 2 tau_e contribute 0, as do
/// pixels without events.
[[nodiscard]] TimeSurface build_time_surface(EventWindow const &window,
                                             double tau_e_seconds,
                                             Timestamp t_query);

// Frame rendering. A value v in [-1, 1] is quantised to q = round(127 v);
// red carries the positive ramp (128 + q), blue the negative ramp (128 - q),
// green stays at 128. Zero maps to neutral gray (128, 128, 128).
inline constexpr std::uint8_t kNeutralGray = 128;

[[nodiscard]] RgbImage render_frame(TimeSurface const &ts);

/// Inverse of render_frame on the quantised grid.
[[nodiscard]] ScalarField decode_frame(RgbImage const &frame);

} // namespace evseg
