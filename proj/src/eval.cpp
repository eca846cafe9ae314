// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>

namespace evseg {

IoUResult iou(BinaryMask const &a, BinaryMask const &b) {
    if (!a.same_shape(b))
        throw DimensionError("iou: mask shapes differ");
    std::size_t inter = 0;
    std::size_t uni = 0;
    auto const &pa = a.data();
    auto const &pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        bool const x = pa[i] != 0;
        bool const y = pb[i] != 0;
        inter += (x && y);
        uni += (x || y);
    }
    if (uni == 0)
        return {1.0, true};
    return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

void DetectionConfig::validate() const {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw InvalidArgument("IoU threshold must lie in (0, 1]");
}

std::vector<Match> greedy_match(std::span<BinaryMask const> pred,
                                std::span<BinaryMask const> gt) {
    std::vector<Match> pairs;
    for (std::size_t g = 0; g < gt.size(); ++g)
        for (std::size_t p = 0; p < pred.size(); ++p) {
            auto const r = iou(pred[p], gt[g]);
            if (!r.both_empty && r.value > 0.0)
                pairs.push_back({g, p, r.value});
        }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](Match const &a, Match const &b) { return a.iou > b.iou; });
    std::vector<bool> gt_used(gt.size());
    std::vector<bool> pred_used(pred.size());
    std::vector<Match> out;
    for (auto const &m : pairs) {
        if (gt_used[m.gt] || pred_used[m.pred])
            continue;
        gt_used[m.gt] = true;
        pred_used[m.pred] = true;
        out.push_back(m);
    }
    return out;
}

DetectionResult detection_rate(std::span<FrameMasks const> pred,
                               std::span<FrameMasks const> gt,
                               DetectionConfig const &cfg) {
    cfg.validate();
    if (pred.size() != gt.size())
        throw InvalidArgument("detection_rate: frame counts differ");
    DetectionResult res;
    double iou_sum = 0.0;
    std::size_t matched = 0;
    for (std::size_t f = 0; f < gt.size(); ++f) {
        res.total += gt[f].size();
        for (auto const &m : greedy_match(pred[f], gt[f])) {
            ++matched;
            iou_sum += m.iou;
            if (m.iou >= cfg.iou_threshold)
                ++res.detected;
        }
    }
    if (res.total > 0)
        res.rate = 100.0 * static_cast<double>(res.detected) /
                   static_cast<double>(res.total);
    if (matched > 0)
        res.mean_iou = iou_sum / static_cast<double>(matched);
    return res;
}

std::map<std::uint16_t, BinaryMask>
event_label_masks(std::span<LabeledEvent const> events, int width,
                  int height) {
    std::map<std::uint16_t, BinaryMask> out;
    for (auto const &le : events) {
        if (le.label == 0)
            continue;
        auto it = out.find(le.label);
        if (it == out.end())
            it = out.emplace(le.label, BinaryMask(width, height)).first;
        it->second(le.event.x, le.event.y) = 1;
    }
    return out;
}

std::map<std::size_t, std::map<std::uint16_t, BinaryMask>>
load_window_masks(std::string const &dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw IoError("not a directory: " + dir);
    static std::regex const pattern(R"(window_(\d+)_obj_(\d+)\.pgm)");
    std::map<std::size_t, std::map<std::uint16_t, BinaryMask>> out;
    std::vector<fs::path> files;
    for (auto const &entry : fs::directory_iterator(dir))
        if (entry.is_regular_file())
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (auto const &path : files) {
        std::smatch m;
        auto const name = path.filename().string();
        if (!std::regex_match(name, m, pattern))
            continue;
        auto const window = static_cast<std::size_t>(std::stoull(m[1]));
        auto const label = static_cast<std::uint16_t>(std::stoul(m[2]));
        out[window].emplace(label, read_pgm_mask(path.string()));
    }
    return out;
}

DetectionResult score_directories(std::string const &pred_dir,
                                  std::string const &gt_dir,
                                  DetectionConfig const &cfg) {
    auto const gt = load_window_masks(gt_dir);
    auto const pred = load_window_masks(pred_dir);
    std::vector<FrameMasks> gt_frames;
    std::vector<FrameMasks> pred_frames;
    for (auto const &[window, objects] : gt) {
        FrameMasks g;
        for (auto const &[label, mask] : objects)
            g.push_back(mask);
        FrameMasks p;
        if (auto it = pred.find(window); it != pred.end())
            for (auto const &[label, mask] : it->second)
                p.push_back(mask);
        gt_frames.push_back(std::move(g));
        pred_frames.push_back(std::move(p));
    }
    return detection_rate(pred_frames, gt_frames, cfg);
}

void write_report_json(std::string const &path,
                       std::span<ReportRow const> rows) {
    nlohmann::json j = nlohmann::json::array();
    for (auto const &r : rows)
        j.push_back(
            {{"sequence", r.sequence}, {"metric", r.metric}, {"value", r.value}});
    std::ofstream os(path);
    if (!os)
        throw IoError("cannot write " + path);
    os << j.dump(2) << '\n';
}

void write_report_csv(std::string const &path,
                      std::span<ReportRow const> rows) {
    std::ofstream os(path);
    if (!os)
        throw IoError("cannot write " + path);
    os << "sequence,metric,value\n";
    for (auto const &r : rows) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", r.value);
        os << r.sequence << ',' << r.metric << ',' << buf << '\n';
    }
}

} // namespace evseg
