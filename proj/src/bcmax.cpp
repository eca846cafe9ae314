// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/bcmax.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evseg {

void BCMaxConfig::validate() const {
    if (!(termination_fraction > 0.0 && termination_fraction < 1.0))
        throw InvalidArgument("termination fraction must lie in (0, 1)");
    if (max_iterations < 1)
        throw InvalidArgument("max_iterations must be >= 1");
    if (dilation_radius < 0)
        throw InvalidArgument("dilation radius must be >= 0");
    space.validate();
    blur.validate();
}

namespace {

// An object already labelled with (within half a grid step of) motion `m`.
ObjectEstimate *same_motion(std::vector<ObjectEstimate> &objects,
                            MotionParams const &m,
                            MotionSearchSpace const &space) {
    auto close = [](double a, double b, SearchAxis const &axis) {
        return std::abs(a - b) <= 0.5 * axis.spacing();
    };
    for (auto &o : objects)
        if (close(o.motion.vx, m.vx, space.vx) &&
            close(o.motion.vy, m.vy, space.vy) &&
            close(o.motion.hz, m.hz, space.hz) &&
            close(o.motion.phi, m.phi, space.phi))
            return &o;
    return nullptr;
}

void check_mask(EventWindow const &window, BinaryMask const &mask) {
    if (mask.width() != window.width || mask.height() != window.height)
        throw InvalidArgument("salient mask does not match the sensor size");
}

} // namespace

EgoEstimate estimate_ego_motion(EventWindow const &window,
                                BinaryMask const &salient_mask,
                                MotionSearchSpace const &space,
                                GridSearchOptions const &opt) {
    check_mask(window, salient_mask);
    std::vector<Event> outside;
    for (auto const &e : window.events)
        if (!salient_mask(e.x, e.y))
            outside.push_back(e);
    EgoEstimate est;
    est.events = outside.size();
    if (outside.empty()) {
        est.warning = true;
        return est;
    }
    auto const res =
        grid_search_motion(outside, window.width, window.height,
                           space.t_ref.value_or(window.midpoint()), space, opt);
    est.motion = res.best;
    est.warning = res.few_events;
    return est;
}

BinaryMask compensated_sharp_region(std::span<Event const> events, int width,
                                    int height, Timestamp t_ref,
                                    MotionParams const &m,
                                    BCMaxConfig const &cfg) {
    BinaryMask region(width, height);
    if (events.empty())
        return region;
    auto const warped = warp_events(events, m, t_ref, width, height);

    // Restrict the blur map to the warped footprint plus a block margin.
    int const largest_block = cfg.blur.block << (cfg.blur.num_scales - 1);
    int const margin = largest_block / 2 + cfg.dilation_radius + 1;
    double x0 = width;
    double y0 = height;
    double x1 = -1;
    double y1 = -1;
    for (auto const &p : warped) {
        if (p.x < 0 || p.y < 0 || p.x > width - 1 || p.y > height - 1)
            continue;
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
    }
    if (x1 < 0)
        return region;
    int cx0 = std::max(0, static_cast<int>(std::floor(x0)) - margin);
    int cy0 = std::max(0, static_cast<int>(std::floor(y0)) - margin);
    int cx1 = std::min(width - 1, static_cast<int>(std::ceil(x1)) + margin);
    int cy1 = std::min(height - 1, static_cast<int>(std::ceil(y1)) + margin);
    int const base = cfg.blur.block;
    auto widen = [](int &lo, int &hi, int need, int limit) {
        while (hi - lo + 1 < need && (lo > 0 || hi < limit - 1)) {
            if (lo > 0)
                --lo;
            if (hi - lo + 1 < need && hi < limit - 1)
                ++hi;
        }
    };
    widen(cx0, cx1, base, width);
    widen(cy0, cy1, base, height);
    int const cw = cx1 - cx0 + 1;
    int const ch = cy1 - cy0 + 1;
    if (cw < base || ch < base)
        return region;

    std::vector<Point2> local;
    local.reserve(warped.size());
    for (auto const &p : warped)
        local.push_back({p.x - cx0, p.y - cy0});
    auto iwe = accumulate_iwe(local, events, ch, cw, IweMode::count,
                              cfg.search.splat);
    auto const smooth = gaussian_blur(iwe.accumulation, cfg.iwe_sigma);
    auto const bm = dct_sharpness_map(smooth, cfg.blur);
    auto const sharp = sharp_region_mask(bm, cfg.dilation_radius);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            region(cx0 + x, cy0 + y) = sharp(x, y);
    return region;
}

BCMaxResult bcmax_segment(EventWindow const &window,
                          BinaryMask const &salient_mask,
                          MotionParams const &ego, BCMaxConfig const &cfg) {
    cfg.validate();
    check_mask(window, salient_mask);
    BCMaxResult res;
    res.ego = ego;
    res.events.reserve(window.events.size());
    for (auto const &e : window.events)
        res.events.push_back({e, ego, 0});

    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < window.events.size(); ++i) {
        auto const &e = window.events[i];
        if (salient_mask(e.x, e.y))
            remaining.push_back(i);
    }
    res.mask_events = remaining.size();
    double const stop_below =
        cfg.termination_fraction * static_cast<double>(res.mask_events);
    Timestamp const t_ref = cfg.space.t_ref.value_or(window.midpoint());

    std::uint16_t next_label = 1;
    std::vector<Event> subset;
    while (true) {
        if (static_cast<double>(remaining.size()) < stop_below) {
            res.terminated_by_fraction = true;
            break;
        }
        if (remaining.size() < cfg.min_events) {
            res.diagnostics.push_back("too few events for a motion estimate (" +
                                      std::to_string(remaining.size()) + ")");
            break;
        }
        if (res.iterations >= cfg.max_iterations) {
            res.diagnostics.push_back("iteration cap reached");
            break;
        }
        ++res.iterations;

        subset.clear();
        for (auto i : remaining)
            subset.push_back(window.events[i]);
        MotionSearchResult search;
        try {
            search = grid_search_motion(subset, window.width, window.height,
                                        t_ref, cfg.space, cfg.search);
        } catch (Error const &err) {
            res.diagnostics.push_back(std::string("grid search failed: ") +
                                      err.what());
            break;
        }

        auto const region = compensated_sharp_region(
            subset, window.width, window.height, t_ref, search.best, cfg);
        auto const warped = warp_events(subset, search.best, t_ref,
                                        window.width, window.height);
        std::vector<std::size_t> keep;
        std::vector<Event> taken;
        for (std::size_t j = 0; j < remaining.size(); ++j) {
            int const x = static_cast<int>(std::lround(warped[j].x));
            int const y = static_cast<int>(std::lround(warped[j].y));
            if (region.contains(x, y) && region(x, y)) {
                auto &le = res.events[remaining[j]];
                le.label = next_label;
                le.motion = search.best;
                taken.push_back(subset[j]);
            } else {
                keep.push_back(remaining[j]);
            }
        }
        if (taken.empty()) {
            res.diagnostics.push_back(
                "iteration " + std::to_string(res.iterations) +
                " extracted no events; stopping");
            break;
        }
        if (auto *prev = same_motion(res.objects, search.best, cfg.space)) {
            for (std::size_t j = 0; j < remaining.size(); ++j)
                if (res.events[remaining[j]].label == next_label)
                    res.events[remaining[j]].label = prev->label;
            prev->event_count += taken.size();
        } else {
            ObjectEstimate obj;
            obj.label = next_label++;
            obj.motion = search.best;
            obj.event_count = taken.size();
            obj.variance = search.best_variance;
            res.objects.push_back(obj);
        }
        remaining = std::move(keep);
    }
    res.residue = remaining.size();
    return res;
}

} // namespace evseg
