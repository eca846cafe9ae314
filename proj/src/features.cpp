// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/features.hpp"

#include "binary_io.hpp"
#include "evseg/event_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace evseg {

PatchGridDims patch_grid_dims(int height, int width, int patch_size) {
    if (patch_size <= 0)
        throw InvalidArgument("patch size must be positive");
    if (height < 0 || width < 0)
        throw InvalidArgument("image dimensions must be non-negative");
    return {height / patch_size, width / patch_size};
}

PatchFeatureGrid::PatchFeatureGrid(int rows, int cols, int dim, int patch_size,
                                   FeatureSource source)
    : rows_(rows), cols_(cols), dim_(dim), patch_size_(patch_size),
      source_(source) {
    if (rows < 0 || cols < 0 || dim < 0 || patch_size <= 0)
        throw InvalidArgument("invalid feature grid layout");
    data_.assign(static_cast<std::size_t>(rows) * cols * dim, 0.0F);
}

namespace {

void normalize_l2(std::span<float> v) {
    double ss = 0.0;
    for (float x : v)
        ss += static_cast<double>(x) * x;
    if (ss <= 0.0)
        return;
    double const inv = 1.0 / std::sqrt(ss);
    for (float &x : v)
        x = static_cast<float>(x * inv);
}

} // namespace

std::vector<std::uint8_t> encode_feature_grid(PatchFeatureGrid const &grid) {
    if (grid.rows() > 0xFFFF || grid.cols() > 0xFFFF ||
        grid.patch_size() > 0xFFFF)
        throw DimensionError("feature grid dimensions do not fit FTG1 header");
    detail::ByteWriter w;
    w.magic("FTG1");
    w.u16(static_cast<std::uint16_t>(grid.rows()));
    w.u16(static_cast<std::uint16_t>(grid.cols()));
    w.u32(static_cast<std::uint32_t>(grid.dim()));
    w.u16(static_cast<std::uint16_t>(grid.patch_size()));
    for (float f : grid.data())
        w.f32(f);
    return w.take();
}

PatchFeatureGrid decode_feature_grid(std::vector<std::uint8_t> const &bytes,
                                     std::string const &what) {
    detail::ByteReader r(bytes, what);
    r.expect_magic("FTG1");
    int const rows = r.u16();
    int const cols = r.u16();
    std::uint32_t const dim = r.u32();
    int const patch = r.u16();
    if (patch == 0)
        throw DimensionError(what + ": patch size 0 in header");
    // Dimensions are checked for overflow before sizing any buffer.
    std::uint64_t const entries =
        static_cast<std::uint64_t>(rows) * cols * static_cast<std::uint64_t>(dim);
    if (dim > static_cast<std::uint32_t>(std::numeric_limits<int>::max()) ||
        entries > (std::uint64_t{1} << 40))
        throw DimensionError(what + ": header dimensions overflow");
    r.require(static_cast<std::size_t>(entries) * 4);
    PatchFeatureGrid g(rows, cols, static_cast<int>(dim), patch,
                       FeatureSource::external);
    for (auto &f : g.data())
        f = r.f32();
    return g;
}

void save_feature_grid(std::string const &path, PatchFeatureGrid const &grid) {
    write_file_bytes(path, encode_feature_grid(grid));
}

PatchFeatureGrid load_feature_grid(std::string const &path) {
    return decode_feature_grid(read_file_bytes(path), path);
}

std::vector<std::uint8_t> encode_flow(FlowField const &flow) {
    if (flow.width() > 0xFFFF || flow.height() > 0xFFFF)
        throw DimensionError("flow dimensions do not fit FLW1 header");
    detail::ByteWriter w;
    w.magic("FLW1");
    w.u16(static_cast<std::uint16_t>(flow.height()));
    w.u16(static_cast<std::uint16_t>(flow.width()));
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        w.f32(flow.u.data()[i]);
        w.f32(flow.v.data()[i]);
    }
    return w.take();
}

FlowField decode_flow(std::vector<std::uint8_t> const &bytes,
                      std::string const &what) {
    detail::ByteReader r(bytes, what);
    r.expect_magic("FLW1");
    int const h = r.u16();
    int const w = r.u16();
    r.require(static_cast<std::size_t>(h) * w * 2 * 4);
    FlowField f(w, h);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u.data()[i] = r.f32();
        f.v.data()[i] = r.f32();
    }
    return f;
}

void save_flow(std::string const &path, FlowField const &flow) {
    write_file_bytes(path, encode_flow(flow));
}

FlowField load_flow(std::string const &path) {
    return decode_flow(read_file_bytes(path), path);
}

PatchFeatureGrid builtin_patch_descriptor(RgbImage const &frame,
                                          int patch_size, int bins, int cells) {
    if (patch_size < 4)
        throw InvalidArgument("patch size must be >= 4");
    if (bins < 4)
        throw InvalidArgument("orientation bins must be >= 4");
    if (cells < 1 || patch_size % cells != 0)
        throw InvalidArgument("cells must divide the patch size");
    if (patch_size > frame.width() || patch_size > frame.height())
        throw InvalidArgument("patch size larger than image");

    int const w = frame.width();
    int const h = frame.height();
    ScalarField lum(w, h);
    for (std::size_t i = 0; i < lum.size(); ++i) {
        auto const px = frame.data()[i];
        lum.data()[i] = (px.r + px.g + px.b) / (3.0 * 255.0);
    }

    auto const dims = patch_grid_dims(h, w, patch_size);
    int const per_cell = bins + 3;
    int const dim = cells * cells * per_cell + 1;
    int const cell_px = patch_size / cells;
    double const cell_n = static_cast<double>(cell_px) * cell_px;
    PatchFeatureGrid grid(dims.rows, dims.cols, dim, patch_size,
                          FeatureSource::builtin);
    for (int pr = 0; pr < dims.rows; ++pr) {
        for (int pc = 0; pc < dims.cols; ++pc) {
            auto out = grid.patch(pr * dims.cols + pc);
            std::fill(out.begin(), out.end(), 0.0f);
            for (int cy = 0; cy < cells; ++cy) {
                for (int cx = 0; cx < cells; ++cx) {
                    float *cell = out.data() + (cy * cells + cx) * per_cell;
                    double sr = 0.0;
                    double sg = 0.0;
                    double sb = 0.0;
                    int const y0 = pr * patch_size + cy * cell_px;
                    int const x0 = pc * patch_size + cx * cell_px;
                    for (int y = y0; y < y0 + cell_px; ++y) {
                        for (int x = x0; x < x0 + cell_px; ++x) {
                            auto const px = frame(x, y);
                            sr += px.r;
                            sg += px.g;
                            sb += px.b;
                            double const gx =
                                0.5 * (lum(std::min(x + 1, w - 1), y) -
                                       lum(std::max(x - 1, 0), y));
                            double const gy =
                                0.5 * (lum(x, std::min(y + 1, h - 1)) -
                                       lum(x, std::max(y - 1, 0)));
                            double const mag = std::hypot(gx, gy);
                            if (mag <= 0.0)
                                continue;
                            double ang = std::atan2(gy, gx);
                            if (ang < 0.0)
                                ang += std::numbers::pi;
                            int const bin = std::min(
                                static_cast<int>(ang / std::numbers::pi * bins),
                                bins - 1);
                            cell[bin] += static_cast<float>(mag);
                        }
                    }
                    for (int k = 0; k < bins; ++k)
                        cell[k] = static_cast<float>(kGradientGain * cell[k] / cell_n);
                    double const mid = 127.5;
                    cell[bins] = static_cast<float>((sr / cell_n - mid) / mid);
                    cell[bins + 1] = static_cast<float>((sg / cell_n - mid) / mid);
                    cell[bins + 2] = static_cast<float>((sb / cell_n - mid) / mid);
                }
            }
            out[dim - 1] = static_cast<float>(kDescriptorBias);
            normalize_l2(out);
        }
    }
    return grid;
}

PatchFeatureGrid flow_features(FlowField const &flow, int patch_size,
                               FlowFeatureOptions const &opt) {
    auto const dims = patch_grid_dims(flow.height(), flow.width(), patch_size);
    if (dims.count() == 0)
        throw InvalidArgument("flow field smaller than one patch");
    int const dim = 3 + kFlowOrientationBins + 1;
    PatchFeatureGrid grid(dims.rows, dims.cols, dim, patch_size,
                          FeatureSource::builtin);
    double const n = static_cast<double>(patch_size) * patch_size;
    for (int pr = 0; pr < dims.rows; ++pr) {
        for (int pc = 0; pc < dims.cols; ++pc) {
            double su = 0.0;
            double sv = 0.0;
            double sm = 0.0;
            std::vector<double> hist(kFlowOrientationBins, 0.0);
            for (int y = pr * patch_size; y < (pr + 1) * patch_size; ++y) {
                for (int x = pc * patch_size; x < (pc + 1) * patch_size; ++x) {
                    double const u = flow.u(x, y);
                    double const v = flow.v(x, y);
                    double const mag = std::hypot(u, v);
                    su += u;
                    sv += v;
                    sm += mag;
                    if (mag <= 0.0)
                        continue;
                    double ang = std::atan2(v, u);
                    if (ang < 0.0)
                        ang += 2.0 * std::numbers::pi;
                    // Bins are centred on multiples of 2 pi / bins.
                    int bin = static_cast<int>(std::floor(
                        ang / (2.0 * std::numbers::pi) * kFlowOrientationBins +
                        0.5));
                    hist[bin % kFlowOrientationBins] += mag;
                }
            }
            double const mean_mag = sm / n;
            auto out = grid.patch(pr * dims.cols + pc);
            out[0] = static_cast<float>(su / n);
            out[1] = static_cast<float>(sv / n);
            out[2] = static_cast<float>(opt.magnitude_weight * mean_mag);
            for (int b = 0; b < kFlowOrientationBins; ++b)
                out[3 + b] = static_cast<float>(hist[b] / n);
            out[3 + kFlowOrientationBins] = static_cast<float>(
                opt.static_threshold > 0.0
                    ? std::max(0.0, 1.0 - mean_mag / opt.static_threshold)
                    : 0.0);
            normalize_l2(out);
        }
    }
    return grid;
}

FlowField synth_flow_from_motion(MotionParams const &motion, int height,
                                 int width, double dt) {
    if (!(dt > 0.0))
        throw InvalidArgument("dt must be positive");
    FlowField f(width, height);
    Point2 const c = sensor_center(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            auto const d = motion_displacement(motion, {double(x), double(y)}, c, dt);
            f.u(x, y) = static_cast<float>(d.x);
            f.v(x, y) = static_cast<float>(d.y);
        }
    }
    return f;
}

} // namespace evseg
