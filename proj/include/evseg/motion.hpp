// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace evseg {

/// 4-DoF image-plane motion: translation (px/s), zoom rate (1/s) and roll rate
/// (rad/s). Zoom and roll act about the sensor centre.
struct MotionParams {
    double vx = 0.0;
    double vy = 0.0;
    double hz = 0.0;
    double phi = 0.0;

    [[nodiscard]] double speed() const noexcept { return std::hypot(vx, vy); }
    [[nodiscard]] bool is_translation() const noexcept {
        return hz == 0.0 && phi == 0.0;
    }

    friend bool operator==(MotionParams const &,
                           MotionParams const &) = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Sensor centre used as origin for zoom and roll.
[[nodiscard]] inline Point2 sensor_center(int width, int height) noexcept {
    return {0.5 * (width - 1), 0.5 * (height - 1)};
}

/// Displacement accumulated by a point at `p` over `dt` seconds:
/// dt v + ((1 + hz dt) R(phi dt) - I)(p - c).
[[nodiscard]] inline Point2 motion_displacement(MotionParams const &m, Point2 p,
                                                Point2 center,
                                                double dt) noexcept {
    Point2 d{m.vx * dt, m.vy * dt};
    if (m.hz != 0.0 || m.phi != 0.0) {
        double const rx = p.x - center.x;
        double const ry = p.y - center.y;
        double const s = 1.0 + m.hz * dt;
        double const c = std::cos(m.phi * dt);
        double const sn = std::sin(m.phi * dt);
        d.x += s * (c * rx - sn * ry) - rx;
        d.y += s * (sn * rx + c * ry) - ry;
    }
    return d;
}

} // namespace evseg
