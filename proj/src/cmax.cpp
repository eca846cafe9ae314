// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/cmax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <type_traits>

namespace evseg {

std::vector<Point2> warp_events(std::span<Event const> events,
                                MotionParams const &m, Timestamp t_ref,
                                int width, int height) {
    Point2 const c = sensor_center(width, height);
    std::vector<Point2> out;
    out.reserve(events.size());
    double const tr = static_cast<double>(t_ref);
    for (auto const &e : events) {
        double const dt = (static_cast<double>(e.t) - tr) * 1e-6;
        Point2 const u{static_cast<double>(e.x), static_cast<double>(e.y)};
        auto const d = motion_displacement(m, u, c, dt);
        out.push_back({u.x - d.x, u.y - d.y});
    }
    return out;
}

namespace {

// A bilinear sample quantised to 1/kSubpixelSteps px: base pixel plus the
// sub-pixel offsets.
struct FixedSample {
    std::size_t base;
    int qx;
    int qy;
};

inline bool inside_image(double x, double y, int width, int height) {
    return x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1;
}

// Round-half-up on non-negative coordinates.
inline FixedSample quantise(double x, double y, int width) {
    static_assert((kSubpixelSteps & (kSubpixelSteps - 1)) == 0);
    auto const fx = static_cast<std::uint32_t>(x * kSubpixelSteps + 0.5);
    auto const fy = static_cast<std::uint32_t>(y * kSubpixelSteps + 0.5);
    std::size_t const x0 = fx / kSubpixelSteps;
    std::size_t const y0 = fy / kSubpixelSteps;
    return {y0 * static_cast<std::size_t>(width) + x0,
            static_cast<int>(fx % kSubpixelSteps),
            static_cast<int>(fy % kSubpixelSteps)};
}

// Calls sink(index, weight) for each pixel touched by a sample at (x, y),
// weights in units of 1/kSubpixelSteps^2; returns false when the sample lies
// outside the image.
template <typename Sink>
bool splat(double x, double y, int width, int height, SplatKind kind,
           Sink &&sink) {
    if (!inside_image(x, y, width, height))
        return false;
    constexpr int kOne = kSubpixelSteps * kSubpixelSteps;
    if (kind == SplatKind::nearest) {
        int const xi = static_cast<int>(std::lround(x));
        int const yi = static_cast<int>(std::lround(y));
        sink(static_cast<std::size_t>(yi) * width + xi, kOne);
        return true;
    }
    auto const q = quantise(x, y, width);
    int const ix = kSubpixelSteps - q.qx;
    int const iy = kSubpixelSteps - q.qy;
    sink(q.base, ix * iy);
    if (q.qx)
        sink(q.base + 1, q.qx * iy);
    if (q.qy) {
        sink(q.base + width, ix * q.qy);
        if (q.qx)
            sink(q.base + width + 1, q.qx * q.qy);
    }
    return true;
}

} // namespace

IWE accumulate_iwe(std::span<Point2 const> warped,
                   std::span<std::int8_t const> polarities, int height,
                   int width, IweMode mode, SplatKind kind) {
    if (mode == IweMode::polarity && polarities.size() != warped.size())
        throw InvalidArgument("polarity count does not match warped events");
    constexpr double kUnit = 1.0 / (kSubpixelSteps * kSubpixelSteps);
    IWE iwe;
    iwe.accumulation = ScalarField(width, height, 0.0);
    auto &acc = iwe.accumulation.data();
    for (std::size_t i = 0; i < warped.size(); ++i) {
        double const b =
            mode == IweMode::count ? 1.0 : static_cast<double>(polarities[i]);
        bool const inside =
            splat(warped[i].x, warped[i].y, width, height, kind,
                  [&](std::size_t idx, int w) { acc[idx] += b * w * kUnit; });
        if (inside) {
            ++iwe.count;
        } else {
            ++iwe.dropped;
            iwe.dropped_mass += std::abs(b);
        }
    }
    return iwe;
}

IWE accumulate_iwe(std::span<Point2 const> warped,
                   std::span<Event const> events, int height, int width,
                   IweMode mode, SplatKind splat_kind) {
    std::vector<std::int8_t> pol;
    pol.reserve(events.size());
    for (auto const &e : events)
        pol.push_back(e.polarity);
    return accumulate_iwe(warped, pol, height, width, mode, splat_kind);
}

double contrast_variance(ScalarField const &field) {
    if (field.empty())
        return 0.0;
    auto const &d = field.data();
    double const n = static_cast<double>(d.size());
    double sum = 0.0;
    for (double v : d)
        sum += v;
    double const mean = sum / n;
    double ss = 0.0;
    for (double v : d)
        ss += (v - mean) * (v - mean);
    return ss / n;
}

SearchAxis SearchAxis::spaced(double min, double max, double step) {
    if (!(step > 0.0) || max < min)
        throw InvalidArgument("search axis needs step > 0 and max >= min");
    int const steps = static_cast<int>(std::floor((max - min) / step + 1e-9)) + 1;
    return {min, min + (steps - 1) * step, steps, true};
}

double SearchAxis::value(int i) const noexcept {
    if (!enabled)
        return 0.0;
    if (steps <= 1)
        return min;
    return min + (max - min) * i / (steps - 1);
}

double SearchAxis::spacing() const noexcept {
    if (!enabled || steps <= 1)
        return 0.0;
    return (max - min) / (steps - 1);
}

std::size_t MotionSearchSpace::candidate_count() const noexcept {
    return static_cast<std::size_t>(vx.size()) * vy.size() * hz.size() *
           phi.size();
}

void MotionSearchSpace::validate() const {
    for (auto const *a : {&vx, &vy, &hz, &phi})
        if (a->enabled && (a->steps < 1 || a->max < a->min))
            throw InvalidArgument("search axis needs steps >= 1 and max >= min");
}

namespace {

// Variance of the IWE without a full-image pass: masses are accumulated as
// exact integers (units of 1/kSubpixelSteps^2) and only 8x8 tiles touched
// by a sample are reduced and cleared. Cells are 32-bit whenever the total
// mass of the window fits.
class VarianceEvaluator {
  public:
    VarianceEvaluator(std::span<Event const> events, int width, int height,
                      Timestamp t_ref, GridSearchOptions const &opt)
        : width_(width), height_(height), opt_(opt),
          narrow_(events.size() <= kNarrowLimit),
          tiles_x_((static_cast<std::size_t>(width) + kTile - 1) >> kTileShift),
          tiles_y_((static_cast<std::size_t>(height) + kTile - 1) >> kTileShift),
          dirty_(tiles_x_ * tiles_y_, 0) {
        auto const pixels = static_cast<std::size_t>(width) * height + width + 1;
        if (narrow_)
            narrow_buffer_.assign(pixels, 0);
        else
            wide_buffer_.assign(pixels, 0);
        center_ = sensor_center(width, height);
        double const tr = static_cast<double>(t_ref);
        x_.reserve(events.size());
        y_.reserve(events.size());
        dt_.reserve(events.size());
        b_.reserve(events.size());
        for (auto const &e : events) {
            x_.push_back(e.x);
            y_.push_back(e.y);
            dt_.push_back((static_cast<double>(e.t) - tr) * 1e-6);
            b_.push_back(opt.mode == IweMode::count ? 1 : e.polarity);
        }
    }

    double operator()(MotionParams const &m) {
        bool const tr = m.is_translation();
        if (narrow_)
            return tr ? evaluate<true>(m, narrow_buffer_)
                      : evaluate<false>(m, narrow_buffer_);
        return tr ? evaluate<true>(m, wide_buffer_)
                  : evaluate<false>(m, wide_buffer_);
    }

  private:
    static constexpr int kOne = kSubpixelSteps * kSubpixelSteps;
    static constexpr std::size_t kNarrowLimit =
        static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max() / kOne);
    static constexpr std::size_t kTileShift = 3;
    static constexpr std::size_t kTile = std::size_t{1} << kTileShift;

    template <bool Translation, typename Cell>
    double evaluate(MotionParams const &m, std::vector<Cell> &buffer) {
        // Sum of squares: bounded by (N kOne)^2 < 2^62 on the narrow path.
        using Square = std::conditional_t<std::is_same_v<Cell, std::int32_t>,
                                          std::int64_t, WideSquare>;
        auto const w = static_cast<std::size_t>(width_);
        auto const h = static_cast<std::size_t>(height_);
        double const xmax = width_ - 1;
        double const ymax = height_ - 1;
        Cell *buf = buffer.data();
        std::uint8_t *dirty = dirty_.data();
        std::size_t const tiles_x = tiles_x_;
        std::int64_t sum = 0;
        bool const nearest = opt_.splat == SplatKind::nearest;
        for (std::size_t i = 0; i < x_.size(); ++i) {
            double wx;
            double wy;
            if constexpr (Translation) {
                wx = x_[i] - dt_[i] * m.vx;
                wy = y_[i] - dt_[i] * m.vy;
            } else {
                auto const d = motion_displacement(m, {x_[i], y_[i]}, center_,
                                                   dt_[i]);
                wx = x_[i] - d.x;
                wy = y_[i] - d.y;
            }
            if (!(wx >= 0.0 && wy >= 0.0 && wx <= xmax && wy <= ymax))
                continue;
            auto const bi = static_cast<Cell>(b_[i]);
            sum += b_[i] * kOne;
            if (nearest) {
                auto const xi = static_cast<std::size_t>(std::lround(wx));
                auto const yi = static_cast<std::size_t>(std::lround(wy));
                buf[yi * w + xi] += static_cast<Cell>(bi * kOne);
                dirty[(yi >> kTileShift) * tiles_x + (xi >> kTileShift)] = 1;
                continue;
            }
            auto const fx = static_cast<std::uint32_t>(wx * kSubpixelSteps + 0.5);
            auto const fy = static_cast<std::uint32_t>(wy * kSubpixelSteps + 0.5);
            std::size_t const x0 = fx / kSubpixelSteps;
            std::size_t const y0 = fy / kSubpixelSteps;
            auto const qx = static_cast<Cell>(fx % kSubpixelSteps);
            auto const qy = static_cast<Cell>(fy % kSubpixelSteps);
            std::size_t const tx0 = x0 >> kTileShift;
            std::size_t const ty0 = y0 >> kTileShift;
            std::size_t const tx1 = (x0 + (qx != 0)) >> kTileShift;
            std::size_t const ty1 = (y0 + (qy != 0)) >> kTileShift;
            dirty[ty0 * tiles_x + tx0] = 1;
            dirty[ty0 * tiles_x + tx1] = 1;
            dirty[ty1 * tiles_x + tx0] = 1;
            dirty[ty1 * tiles_x + tx1] = 1;
            Cell const ix = kSubpixelSteps - qx;
            Cell const iy = kSubpixelSteps - qy;
            // Branch-free: zero-weight neighbours may fall into the padding.
            Cell *cell = buf + y0 * w + x0;
            cell[0] += bi * ix * iy;
            cell[1] += bi * qx * iy;
            cell[w] += bi * ix * qy;
            cell[w + 1] += bi * qx * qy;
        }
        Square sq = 0;
        for (std::size_t ty = 0; ty < tiles_y_; ++ty)
            for (std::size_t tx = 0; tx < tiles_x; ++tx) {
                if (!dirty[ty * tiles_x + tx])
                    continue;
                dirty[ty * tiles_x + tx] = 0;
                std::size_t const x1 = std::min(w, (tx + 1) << kTileShift);
                std::size_t const y1 = std::min(h, (ty + 1) << kTileShift);
                for (std::size_t y = ty << kTileShift; y < y1; ++y) {
                    Cell *row = buf + y * w;
                    for (std::size_t x = tx << kTileShift; x < x1; ++x) {
                        auto const v = static_cast<std::int64_t>(row[x]);
                        sq += static_cast<Square>(v) * v;
                        row[x] = 0;
                    }
                }
            }
        constexpr double kUnit = 1.0 / kOne;
        double const n = static_cast<double>(w * h);
        double const mean = static_cast<double>(sum) * kUnit / n;
        double const mean_sq = static_cast<double>(sq) * kUnit * kUnit / n;
        return std::max(0.0, mean_sq - mean * mean);
    }

    __extension__ using WideSquare = __int128;

    int width_;
    int height_;
    GridSearchOptions opt_;
    bool narrow_;
    Point2 center_;
    std::vector<double> x_, y_, dt_;
    std::vector<std::int64_t> b_;
    std::vector<std::int32_t> narrow_buffer_;
    std::vector<std::int64_t> wide_buffer_;
    std::size_t tiles_x_;
    std::size_t tiles_y_;
    std::vector<std::uint8_t> dirty_;
};

bool lexicographically_less(MotionParams const &a, MotionParams const &b) {
    if (a.vx != b.vx)
        return a.vx < b.vx;
    if (a.vy != b.vy)
        return a.vy < b.vy;
    if (a.hz != b.hz)
        return a.hz < b.hz;
    return a.phi < b.phi;
}

// True when candidate (m, var) should replace the incumbent.
bool better(double var, MotionParams const &m, double best_var,
            MotionParams const &best) {
    double const scale = std::max(std::abs(var), std::abs(best_var));
    if (std::abs(var - best_var) > 1e-12 * scale)
        return var > best_var;
    double const sa = m.speed();
    double const sb = best.speed();
    if (sa != sb)
        return sa < sb;
    return lexicographically_less(m, best);
}

} // namespace

MotionSearchResult grid_search_motion(std::span<Event const> events, int width,
                                      int height, Timestamp t_ref,
                                      MotionSearchSpace const &space,
                                      GridSearchOptions const &opt) {
    space.validate();
    if (events.empty())
        throw EmptyWindowError("grid search on an empty event set");
    MotionSearchResult res;
    res.few_events = events.size() < opt.min_events;
    VarianceEvaluator eval(events, width, height, t_ref, opt);

    res.variance_grid.reserve(space.candidate_count());
    res.candidates.reserve(space.candidate_count());
    bool have_best = false;
    for (int ip = 0; ip < space.phi.size(); ++ip)
        for (int ih = 0; ih < space.hz.size(); ++ih)
            for (int iy = 0; iy < space.vy.size(); ++iy)
                for (int ix = 0; ix < space.vx.size(); ++ix) {
                    MotionParams const m{space.vx.value(ix), space.vy.value(iy),
                                         space.hz.value(ih),
                                         space.phi.value(ip)};
                    double const var = eval(m);
                    res.variance_grid.push_back(var);
                    res.candidates.push_back(m);
                    if (!have_best ||
                        better(var, m, res.best_variance, res.best)) {
                        res.best = m;
                        res.best_variance = var;
                        have_best = true;
                    }
                }
    res.evaluated = res.candidates.size();

    if (space.refine) {
        constexpr int kFine = 10;
        auto fine_axis = [](SearchAxis const &a, double center) {
            if (!a.enabled || a.steps <= 1)
                return SearchAxis{center, center, 1, a.enabled};
            double const h = a.spacing();
            return SearchAxis{center - h, center + h, 2 * kFine + 1, true};
        };
        MotionParams const coarse = res.best;
        SearchAxis const fx = fine_axis(space.vx, coarse.vx);
        SearchAxis const fy = fine_axis(space.vy, coarse.vy);
        SearchAxis const fh = fine_axis(space.hz, coarse.hz);
        SearchAxis const fp = fine_axis(space.phi, coarse.phi);
        for (int ip = 0; ip < fp.size(); ++ip)
            for (int ih = 0; ih < fh.size(); ++ih)
                for (int iy = 0; iy < fy.size(); ++iy)
                    for (int ix = 0; ix < fx.size(); ++ix) {
                        MotionParams const m{fx.value(ix), fy.value(iy),
                                             fh.value(ih), fp.value(ip)};
                        double const var = eval(m);
                        ++res.evaluated;
                        if (better(var, m, res.best_variance, res.best)) {
                            res.best = m;
                            res.best_variance = var;
                        }
                    }
    }
    return res;
}

MotionSearchResult grid_search_motion(EventWindow const &window,
                                      MotionSearchSpace const &space,
                                      GridSearchOptions const &opt) {
    if (window.events.empty())
        throw EmptyWindowError("grid search on an empty window");
    Timestamp const t_ref = space.t_ref.value_or(window.midpoint());
    if (t_ref < window.t_start || t_ref > window.t_end)
        throw InvalidArgument("t_ref outside the window");
    return grid_search_motion(window.events, window.width, window.height, t_ref,
                              space, opt);
}

void write_variance_grid_csv(std::ostream &os, MotionSearchResult const &res) {
    os << "vx,vy,hz,phi,variance\n";
    for (std::size_t i = 0; i < res.candidates.size(); ++i) {
        auto const &m = res.candidates[i];
        os << m.vx << ',' << m.vy << ',' << m.hz << ',' << m.phi << ','
           << res.variance_grid[i] << '\n';
    }
}

} // namespace evseg
