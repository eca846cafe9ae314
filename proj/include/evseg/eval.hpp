// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/eval.hpp
/// @brief IoU, detection rate and report emission.

#pragma once

#include "evseg/event_io.hpp"
#include "evseg/grid.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace evseg {

struct IoUResult {
    double value = 0.0;
    bool both_empty = false; ///< both masks empty; value is 1 by convention
};

/// |a & b| / |a | b|. Throws DimensionError on a shape mismatch.
[[nodiscard]] IoUResult iou(BinaryMask const &a, BinaryMask const &b);

struct DetectionConfig {
    double iou_threshold = 0.5;
    void validate() const;
};

struct Match {
    std::size_t gt = 0;
    std::size_t pred = 0;
    double iou = 0.0;
};

/// Greedy one-to-one assignment, highest IoU first. Pairs with zero overlap
/// are never matched. Ties keep the lower (gt, pred) index pair first.
[[nodiscard]] std::vector<Match> greedy_match(std::span<BinaryMask const> pred,
                                              std::span<BinaryMask const> gt);

struct DetectionResult {
    double rate = 0.0; ///< percentage of detected GT instances
    std::size_t detected = 0;
    std::size_t total = 0;
    double mean_iou = 0.0; ///< over matched GT instances (0 if none)
};

using FrameMasks = std::vector<BinaryMask>;

/// Per frame and GT object: detected iff greedily matched with IoU at or
/// above the threshold. Throws InvalidArgument when frame counts differ.
[[nodiscard]] DetectionResult
detection_rate(std::span<FrameMasks const> pred, std::span<FrameMasks const> gt,
               DetectionConfig const &cfg = {});

/// Pixels touched by the events of each nonzero label.
[[nodiscard]] std::map<std::uint16_t, BinaryMask>
event_label_masks(std::span<LabeledEvent const> events, int width, int height);

/// Masks named window_NNNNNN_obj_K.pgm in `dir`, keyed by window then label.
[[nodiscard]] std::map<std::size_t, std::map<std::uint16_t, BinaryMask>>
load_window_masks(std::string const &dir);

/// Scores every window present in the ground-truth directory.
[[nodiscard]] DetectionResult score_directories(std::string const &pred_dir,
                                                std::string const &gt_dir,
                                                DetectionConfig const &cfg = {});

struct ReportRow {
    std::string sequence;
    std::string metric;
    double value = 0.0;
};

void write_report_json(std::string const &path,
                       std::span<ReportRow const> rows);
void write_report_csv(std::string const &path, std::span<ReportRow const> rows);

} // namespace evseg
