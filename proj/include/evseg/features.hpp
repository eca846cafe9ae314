// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/features.hpp
/// @brief Per-patch feature grids and per-pixel flow fields.
///
/// Feature grids arrive either from files exported by an external backbone
/// (FTG1) or from the built-in gradient/intensity descriptor. Flow arrives as
/// FLW1 files or from the analytic motion model.
///
/// FTG1: `"FTG1" u16 H_p u16 W_p u32 D u16 P`, then H_p*W_p*D f32, row-major.
/// FLW1: `"FLW1" u16 H u16 W`, then H*W*2 f32 interleaved (u, v) per pixel.

#pragma once

#include "evseg/grid.hpp"
#include "evseg/motion.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evseg {

enum class FeatureSource { external, builtin };

struct PatchGridDims {
    int rows = 0; ///< H_p = floor(H / P)
    int cols = 0; ///< W_p = floor(W / P)
    [[nodiscard]] int count() const noexcept { return rows * cols; }
};

[[nodiscard]] PatchGridDims patch_grid_dims(int height, int width,
                                            int patch_size);

class PatchFeatureGrid {
  public:
    PatchFeatureGrid() = default;
    PatchFeatureGrid(int rows, int cols, int dim, int patch_size,
                     FeatureSource source = FeatureSource::builtin);

    [[nodiscard]] int rows() const noexcept { return rows_; }
    [[nodiscard]] int cols() const noexcept { return cols_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int patch_size() const noexcept { return patch_size_; }
    [[nodiscard]] int count() const noexcept { return rows_ * cols_; }
    [[nodiscard]] FeatureSource source() const noexcept { return source_; }

    [[nodiscard]] std::span<float> patch(int index) {
        return {data_.data() + static_cast<std::size_t>(index) * dim_,
                static_cast<std::size_t>(dim_)};
    }
    [[nodiscard]] std::span<float const> patch(int index) const {
        return {data_.data() + static_cast<std::size_t>(index) * dim_,
                static_cast<std::size_t>(dim_)};
    }
    [[nodiscard]] std::span<float const> patch(int row, int col) const {
        return patch(row * cols_ + col);
    }

    [[nodiscard]] std::vector<float> &data() noexcept { return data_; }
    [[nodiscard]] std::vector<float> const &data() const noexcept {
        return data_;
    }

    [[nodiscard]] bool same_layout(PatchFeatureGrid const &o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_ && dim_ == o.dim_ &&
               patch_size_ == o.patch_size_;
    }

    friend bool operator==(PatchFeatureGrid const &a,
                           PatchFeatureGrid const &b) {
        return a.same_layout(b) && a.data_ == b.data_;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    int dim_ = 0;
    int patch_size_ = 0;
    FeatureSource source_ = FeatureSource::builtin;
    std::vector<float> data_;
};

/// Per-pixel displacement over one frame interval, in pixels.
struct FlowField {
    Grid<float> u;
    Grid<float> v;

    FlowField() = default;
    FlowField(int width, int height) : u(width, height), v(width, height) {}

    [[nodiscard]] int width() const noexcept { return u.width(); }
    [[nodiscard]] int height() const noexcept { return u.height(); }
    friend bool operator==(FlowField const &, FlowField const &) = default;
};

[[nodiscard]] std::vector<std::uint8_t>
encode_feature_grid(PatchFeatureGrid const &grid);
[[nodiscard]] PatchFeatureGrid
decode_feature_grid(std::vector<std::uint8_t> const &bytes,
                    std::string const &what = "feature grid");
void save_feature_grid(std::string const &path, PatchFeatureGrid const &grid);
[[nodiscard]] PatchFeatureGrid load_feature_grid(std::string const &path);

[[nodiscard]] std::vector<std::uint8_t> encode_flow(FlowField const &flow);
[[nodiscard]] FlowField decode_flow(std::vector<std::uint8_t> const &bytes,
                                    std::string const &what = "flow");
void save_flow(std::string const &path, FlowField const &flow);
[[nodiscard]] FlowField load_flow(std::string const &path);

/// Handcrafted patch descriptor. The patch is split into cells x cells
/// sub-cells; each contributes a magnitude-weighted histogram of `bins`
/// unsigned gradient orientations (mean per pixel, scaled by
/// kGradientGain) and its three mean channel intensities centred on mid-gray
/// and scaled to [-1, 1]. A constant kDescriptorBias term follows, so a
/// uniform mid-gray patch is not a zero vector. The whole vector is
/// L2-normalised. D = cells^2 (bins + 3) + 1.
[[nodiscard]] PatchFeatureGrid builtin_patch_descriptor(RgbImage const &frame,
                                                        int patch_size,
                                                        int bins = 8,
                                                        int cells = 1);

inline constexpr double kGradientGain = 4.0;
inline constexpr double kDescriptorBias = 0.05;

/// Number of flow-direction bins used by flow_features.
inline constexpr int kFlowOrientationBins = 8;

struct FlowFeatureOptions {
    /// Weight of the mean-magnitude entry relative to (mean u, mean v).
    double magnitude_weight = 2.0;
    /// Patches whose mean magnitude is below this (px/frame) get a "static"
    /// component that fades linearly to zero at the threshold.
    double static_threshold = 1.0;
};

/// Per patch, the L2-normalised vector
/// (mean u, mean v, w * mean |f|, direction histogram, static component).
/// D = 3 + kFlowOrientationBins + 1. Zero flow yields the pure static vector.
[[nodiscard]] PatchFeatureGrid flow_features(FlowField const &flow,
                                             int patch_size,
                                             FlowFeatureOptions const &opt = {});

/// Per-pixel displacement implied by `motion` over `dt` seconds.
[[nodiscard]] FlowField synth_flow_from_motion(MotionParams const &motion,
                                               int height, int width,
                                               double dt);

} // namespace evseg
