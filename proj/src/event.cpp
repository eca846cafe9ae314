// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/event.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace evseg {

void require_sorted(std::span<Event const> events) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].t < events[i - 1].t)
            throw UnsortedStreamError(
                i, "event stream not sorted by timestamp at index " +
                       std::to_string(i));
    }
}

void require_in_bounds(std::span<Event const> events, int width, int height) {
    for (std::size_t i = 0; i < events.size(); ++i) {
        auto const &e = events[i];
        if (e.x >= width || e.y >= height)
            throw InvalidArgument("event " + std::to_string(i) +
                                  " outside sensor bounds");
        if (e.polarity != 1 && e.polarity != -1)
            throw InvalidArgument("event " + std::to_string(i) +
                                  " has polarity other than +-1");
    }
}

std::vector<EventWindow> slice_windows(std::span<Event const> events,
                                       Timestamp delta_t, int width,
                                       int height) {
    if (events.empty()) {
        if (delta_t == 0)
            throw InvalidArgument("delta_t must be positive");
        return {};
    }
    return slice_windows_from(events, events.front().t, delta_t, width,
                              height);
}

std::vector<EventWindow> slice_windows_from(std::span<Event const> events,
                                            Timestamp origin, Timestamp delta_t,
                                            int width, int height) {
    if (delta_t == 0)
        throw InvalidArgument("delta_t must be positive");
    require_sorted(events);
    std::vector<EventWindow> windows;
    if (events.empty())
        return windows;
    if (events.front().t < origin)
        throw InvalidArgument("window origin lies after the first event");

    Timestamp const t_first = origin;
    Timestamp const t_last = events.back().t;
    std::size_t const count = (t_last - t_first) / delta_t + 1;
    windows.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        windows[k].t_start = t_first + k * delta_t;
        windows[k].t_end = windows[k].t_start + delta_t;
        windows[k].width = width;
        windows[k].height = height;
    }
    for (auto const &e : events)
        windows[(e.t - t_first) / delta_t].events.push_back(e);
    return windows;
}

TimeSurface build_time_surface(EventWindow const &window,
                               double tau_e_seconds, Timestamp t_query) {
    if (!(tau_e_seconds > 0.0))
        throw InvalidArgument("tau_e must be positive");
    TimeSurface ts;
    ts.tau_e = tau_e_seconds;
    ts.t_query = t_query;
    ts.values = ScalarField(window.width, window.height, 0.0);

    // Later events overwrite earlier ones since the window is sorted.
    Grid<std::int64_t> latest(window.width, window.height, -1);
    Grid<std::int8_t> polarity(window.width, window.height, 0);
    for (auto const &e : window.events) {
        if (e.t > t_query)
            throw InvalidArgument(
                "t_query precedes an event in the window");
        latest(e.x, e.y) = static_cast<std::int64_t>(e.t);
        polarity(e.x, e.y) = e.polarity;
    }

    double const two_tau_us = 2.0 * tau_e_seconds * 1e6;
    for (int y = 0; y < window.height; ++y) {
        for (int x = 0; x < window.width; ++x) {
            if (latest(x, y) < 0)
                continue;
            double const age =
                static_cast<double>(t_query) - static_cast<double>(latest(x, y));
            if (age > two_tau_us)
                continue;
            ts.values(x, y) = polarity(x, y) * (1.0 - age / two_tau_us);
        }
    }
    return ts;
}

RgbImage render_frame(TimeSurface const &ts) {
    RgbImage img(ts.values.width(), ts.values.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
        double const v = std::clamp(ts.values.data()[i], -1.0, 1.0);
        int const q = static_cast<int>(std::lround(127.0 * v));
        Rgb px{kNeutralGray, kNeutralGray, kNeutralGray};
        if (q > 0)
            px.r = static_cast<std::uint8_t>(kNeutralGray + q);
        else if (q < 0)
            px.b = static_cast<std::uint8_t>(kNeutralGray - q);
        img.data()[i] = px;
    }
    return img;
}

ScalarField decode_frame(RgbImage const &frame) {
    ScalarField out(frame.width(), frame.height());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        auto const px = frame.data()[i];
        int const q = (px.r - kNeutralGray) - (px.b - kNeutralGray);
        out.data()[i] = q / 127.0;
    }
    return out;
}

} // namespace evseg
