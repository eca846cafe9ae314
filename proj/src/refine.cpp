// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/refine.hpp"

#include "evseg/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace evseg {

void DMRConfig::validate() const {
    if (window < 1 || top_k < 1 || radius < 1)
        throw InvalidArgument("DMR window, top_k and radius must be >= 1");
    if (!(theta > 0.0 && theta < 1.0))
        throw InvalidArgument("DMR theta must lie in (0, 1)");
    if (!(temperature > 0.0))
        throw InvalidArgument("DMR temperature must be positive");
}

namespace {

double cosine(std::span<float const> a, std::span<float const> b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na <= 0.0 || nb <= 0.0)
        return 0.0;
    return dot / std::sqrt(na * nb);
}

double mean_abs_diff(BinaryMask const &a, BinaryMask const &b) {
    if (a.size() == 0)
        return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        diff += (a.data()[i] != 0) != (b.data()[i] != 0) ? 1 : 0;
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

void check_sequence(MaskSequence const &masks,
                    std::span<PatchFeatureGrid const> feats) {
    if (masks.masks.size() != feats.size() ||
        masks.valid.size() != masks.masks.size())
        throw InvalidArgument("mask, validity and feature counts differ");
    for (std::size_t i = 1; i < masks.size(); ++i)
        if (!masks.masks[i].same_shape(masks.masks[0]))
            throw InvalidArgument("masks in a sequence must share dimensions");
}

} // namespace

BinaryMask propagate_mask(PatchFeatureGrid const &feat_src,
                          PatchFeatureGrid const &feat_dst,
                          BinaryMask const &mask_src, DMRConfig const &cfg) {
    cfg.validate();
    if (!feat_src.same_layout(feat_dst))
        throw InvalidArgument("source and destination feature grids differ");
    int const rows = feat_src.rows();
    int const cols = feat_src.cols();
    int const p = feat_src.patch_size();
    if (rows * p > mask_src.height() || cols * p > mask_src.width())
        throw InvalidArgument("mask smaller than the feature grid footprint");

    struct Candidate {
        double sim;
        int dist;
        int index;
    };
    std::vector<Candidate> cands;
    std::vector<double> weight;
    BinaryMask out(mask_src.width(), mask_src.height());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            auto const dst = feat_dst.patch(r, c);
            cands.clear();
            for (int sr = std::max(0, r - cfg.radius);
                 sr <= std::min(rows - 1, r + cfg.radius); ++sr)
                for (int sc = std::max(0, c - cfg.radius);
                     sc <= std::min(cols - 1, c + cfg.radius); ++sc)
                    cands.push_back({cosine(feat_src.patch(sr, sc), dst),
                                     std::max(std::abs(sr - r), std::abs(sc - c)),
                                     sr * cols + sc});
            auto const k = std::min<std::size_t>(cfg.top_k, cands.size());
            std::partial_sort(cands.begin(), cands.begin() + k, cands.end(),
                              [](Candidate const &a, Candidate const &b) {
                                  if (a.sim != b.sim)
                                      return a.sim > b.sim;
                                  if (a.dist != b.dist)
                                      return a.dist < b.dist;
                                  return a.index < b.index;
                              });
            weight.assign(k, 0.0);
            double den = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                weight[i] =
                    std::exp((cands[i].sim - cands[0].sim) / cfg.temperature);
                den += weight[i];
            }
            // Transfer pixel labels at the same offset inside each match.
            for (int oy = 0; oy < p; ++oy)
                for (int ox = 0; ox < p; ++ox) {
                    double num = 0.0;
                    for (std::size_t i = 0; i < k; ++i) {
                        int const sr = cands[i].index / cols;
                        int const sc = cands[i].index % cols;
                        if (mask_src(sc * p + ox, sr * p + oy))
                            num += weight[i];
                    }
                    out(c * p + ox, r * p + oy) = num >= cfg.theta * den ? 1 : 0;
                }
        }
    }
    return out;
}

CoherenceLosses coherence_losses(MaskSequence const &masks,
                                 std::span<PatchFeatureGrid const> feats,
                                 DMRConfig const &cfg) {
    check_sequence(masks, feats);
    std::size_t const n = masks.size();
    CoherenceLosses out;
    out.per_frame.assign(n, std::numeric_limits<double>::infinity());
    std::size_t valid = 0;
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (!masks.valid[t])
            continue;
        double loss = 0.0;
        if (t > 0 && masks.valid[t - 1]) {
            loss = mean_abs_diff(propagate_mask(feats[t - 1], feats[t],
                                                masks.masks[t - 1], cfg),
                                 masks.masks[t]);
        } else if (t + 1 < n && masks.valid[t + 1]) {
            loss = mean_abs_diff(propagate_mask(feats[t + 1], feats[t],
                                                masks.masks[t + 1], cfg),
                                 masks.masks[t]);
        }
        out.per_frame[t] = loss;
        sum += loss;
        ++valid;
    }
    if (valid == 0)
        throw InvalidArgument("coherence_losses: no valid frames");
    out.mean = sum / static_cast<double>(valid);
    return out;
}

std::size_t select_keyframe(std::span<double const> losses, double mean) {
    if (losses.empty())
        throw InvalidArgument("select_keyframe: no frames");
    std::size_t best = losses.size();
    for (std::size_t t = 0; t < losses.size(); ++t)
        if (losses[t] < mean && (best == losses.size() || losses[t] < losses[best]))
            best = t;
    if (best != losses.size())
        return best;
    return static_cast<std::size_t>(
        std::min_element(losses.begin(), losses.end()) - losses.begin());
}

MaskSequence dynamic_mask_refinement(MaskSequence const &masks,
                                     std::span<PatchFeatureGrid const> feats,
                                     DMRConfig const &cfg) {
    cfg.validate();
    check_sequence(masks, feats);
    std::size_t const n = masks.size();
    MaskSequence out;
    if (n == 0)
        return out;
    out.masks = masks.masks;
    out.valid.assign(n, 1);

    auto const any_valid = std::any_of(masks.valid.begin(), masks.valid.end(),
                                       [](auto v) { return v != 0; });
    if (!any_valid) {
        for (auto &m : out.masks)
            m = BinaryMask(m.width(), m.height());
        return out;
    }
    auto const losses = coherence_losses(masks, feats, cfg);

    auto const win = static_cast<std::size_t>(cfg.window);
    for (std::size_t s = 0; s < n; s += win) {
        std::size_t const e = std::min(n, s + win);
        std::span<double const> local(losses.per_frame.data() + s, e - s);

        double sum = 0.0;
        std::size_t valid = 0;
        for (std::size_t t = s; t < e; ++t)
            if (masks.valid[t]) {
                sum += losses.per_frame[t];
                ++valid;
            }

        std::size_t key = 0;
        bool seeded = false;
        if (valid > 0) {
            double const mean = sum / static_cast<double>(valid);
            key = s + select_keyframe(local, mean);
            // Walk both directions from the keyframe. Coherent frames re-anchor
            // the chain with their own mask; the others pass on the
            // propagated one.
            std::vector<BinaryMask> anchor(e - s);
            anchor[key - s] = masks.masks[key];
            auto refine_from = [&](std::size_t from, std::size_t to) {
                auto prop = propagate_mask(feats[from], feats[to],
                                           anchor[from - s], cfg);
                bool const replace =
                    !masks.valid[to] || losses.per_frame[to] >= mean;
                if (replace) {
                    anchor[to - s] = prop;
                    out.masks[to] = std::move(prop);
                } else {
                    anchor[to - s] = masks.masks[to];
                    out.masks[to] = mask_union(masks.masks[to], prop);
                }
            };
            for (std::size_t t = key + 1; t < e; ++t)
                refine_from(t - 1, t);
            for (std::size_t t = key; t-- > s;)
                refine_from(t + 1, t);
            seeded = true;
        }
        if (!seeded) {
            // Whole window invalid: carry the previous window forward.
            if (s > 0) {
                for (std::size_t t = s; t < e; ++t)
                    out.masks[t] = propagate_mask(feats[t - 1], feats[t],
                                                  out.masks[t - 1], cfg);
            } else {
                // No earlier frame; pull back from the first valid frame.
                std::size_t first = e;
                while (!masks.valid[first])
                    ++first;
                for (std::size_t t = first; t-- > s;)
                    out.masks[t] = propagate_mask(
                        feats[t + 1], feats[t],
                        t + 1 == first ? masks.masks[first] : out.masks[t + 1],
                        cfg);
            }
        }
    }
    return out;
}

} // namespace evseg
