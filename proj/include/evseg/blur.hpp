// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/blur.hpp
/// @brief Spatially varying sharpness from block DCT high-frequency content.

#pragma once

#include "evseg/grid.hpp"

#include <vector>

namespace evseg {

struct BlurOptions {
    int num_scales = 2;
    int block = 16; ///< power of two >= 8
    /// Spacing of evaluated block centres; 0 means block / 4. Values between
    /// centres are bilinearly interpolated.
    int stride = 0;
    /// When false, scale s keeps full resolution and uses block * 2^(s-1);
    /// when true, scale s downsamples the image by 2^(s-1) and keeps `block`.
    bool downsample = false;

    void validate() const;
};

struct BlurMap {
    ScalarField sharpness; ///< min-max normalised to [0, 1], 1 = sharp
    /// Per-pixel max over scales of the mean absolute high-frequency DCT
    /// coefficient, divided by the image's mean absolute intensity.
    ScalarField raw;
    std::vector<int> block_sizes; ///< block size used at each scale
};

/// Raw scores below this are DCT round-off on flat content and read as 0.
inline constexpr double kRawZero = 1e-12;

/// High-frequency coefficients are those with row + column index > block / 2
/// (DC is index 0). Borders use reflect-101 padding. A map whose raw scores
/// are all equal normalises to 1 where the score is positive and 0 elsewhere.
[[nodiscard]] BlurMap dct_sharpness_map(ScalarField const &image,
                                        BlurOptions const &opt = {});

/// Mean of the raw (pre-normalisation) score.
[[nodiscard]] double mean_sharpness_score(BlurMap const &bm);

/// Otsu threshold over the non-zero entries (256 bins on [0, 1]).
/// Entries >= the returned value form the upper class. If all non-zero
/// entries share one bin every one of them passes; with no non-zero entry
/// nothing does.
[[nodiscard]] double otsu_threshold_nonzero(ScalarField const &values);

/// Pixels above the Otsu threshold, dilated by a disc of `dilation_radius`.
[[nodiscard]] BinaryMask sharp_region_mask(BlurMap const &bm,
                                           int dilation_radius);

} // namespace evseg
