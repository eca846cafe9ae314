// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/refine.hpp
/// @brief Dynamic mask refinement: temporal coherence scoring, keyframe
/// selection and bidirectional feature-affinity mask propagation.

#pragma once

#include "evseg/features.hpp"
#include "evseg/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace evseg {

struct MaskSequence {
    std::vector<BinaryMask> masks;
    std::vector<std::uint8_t> valid; ///< frame produced a usable mask

    [[nodiscard]] std::size_t size() const noexcept { return masks.size(); }
};

struct DMRConfig {
    int window = 10;     ///< frames per refinement window
    int top_k = 5;       ///< neighbours gathered per destination patch
    int radius = 3;      ///< search radius in patches (square window)
    double theta = 0.5;  ///< soft-label binarisation threshold
    /// Softmax temperature applied to cosine similarities when weighting the
    /// gathered neighbours.
    double temperature = 0.01;

    void validate() const;
};

/// Move a mask from the source frame to the destination frame. Each
/// destination patch collects the `top_k` most cosine-similar source patches
/// within `radius` patches. A destination pixel's soft label is the softmax
/// similarity-weighted mean of the source mask at the same offset inside each
/// gathered patch, binarised at `theta`. Pixels outside the patch footprint
/// stay clear.
[[nodiscard]] BinaryMask propagate_mask(PatchFeatureGrid const &feat_src,
                                        PatchFeatureGrid const &feat_dst,
                                        BinaryMask const &mask_src,
                                        DMRConfig const &cfg = {});

struct CoherenceLosses {
    /// Mean absolute pixel difference between each mask and the mask
    /// propagated from its neighbour. Invalid frames hold +inf.
    std::vector<double> per_frame;
    double mean = 0.0; ///< average over valid frames
};

/// Frame t is compared against the propagation of frame t-1. Frame 0 (and
/// any frame whose predecessor is invalid) uses the backward propagation of
/// frame t+1 instead; a frame with no valid neighbour scores 0.
[[nodiscard]] CoherenceLosses coherence_losses(
    MaskSequence const &masks, std::span<PatchFeatureGrid const> feats,
    DMRConfig const &cfg = {});

/// argmin of L over the frames with L < mean; falls back to the global
/// argmin (lowest index on ties) when no frame is strictly below the mean.
[[nodiscard]] std::size_t select_keyframe(std::span<double const> losses,
                                          double mean);

/// Refine each window of `cfg.window` frames from its keyframe. Frames that
/// are invalid or whose loss reaches the window mean take the propagated
/// mask; the remaining frames take the union of their own and the propagated
/// mask. Every output frame is valid.
[[nodiscard]] MaskSequence dynamic_mask_refinement(
    MaskSequence const &masks, std::span<PatchFeatureGrid const> feats,
    DMRConfig const &cfg = {});

} // namespace evseg
