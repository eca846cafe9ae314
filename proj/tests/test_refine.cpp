// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include "evseg/error.hpp"
#include "evseg/eval.hpp"
#include "evseg/refine.hpp"
#include "evseg/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace evseg;

namespace {

constexpr int kP = 8;

// Background patches share one feature vector; each object patch gets its
// own random vector. Patch (r, c) belongs to the object iff obj(r, c).
PatchFeatureGrid layered_features(test::Rng &rng, int rows, int cols,
                                  std::vector<std::uint8_t> const &obj,
                                  std::vector<float> const &background) {
    auto g = test::random_features(rng, rows, cols,
                                   static_cast<int>(background.size()), kP);
    for (int i = 0; i < rows * cols; ++i)
        if (!obj[static_cast<std::size_t>(i)])
            std::copy(background.begin(), background.end(),
                      g.patch(i).begin());
    return g;
}

BinaryMask patch_mask(std::vector<std::uint8_t> const &obj, int rows, int cols) {
    BinaryMask m(cols * kP, rows * kP);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (obj[static_cast<std::size_t>(r * cols + c)])
                for (int y = 0; y < kP; ++y)
                    for (int x = 0; x < kP; ++x)
                        m(c * kP + x, r * kP + y) = 1;
    return m;
}

// A static coherent sequence: identical features and masks in every frame.
struct Sequence {
    MaskSequence masks;
    std::vector<PatchFeatureGrid> feats;
};

Sequence static_sequence(test::Rng &rng, std::size_t n, int rows, int cols) {
    std::vector<std::uint8_t> obj(static_cast<std::size_t>(rows * cols), 0);
    for (auto &o : obj)
        o = rng.coin(0.3) ? 1 : 0;
    std::vector<float> bg(6);
    for (auto &v : bg)
        v = static_cast<float>(rng.uniform(-1, 1));
    auto const f = layered_features(rng, rows, cols, obj, bg);
    auto const m = patch_mask(obj, rows, cols);
    Sequence s;
    for (std::size_t i = 0; i < n; ++i) {
        s.masks.masks.push_back(m);
        s.masks.valid.push_back(1);
        s.feats.push_back(f);
    }
    return s;
}

// Textured object translating over a plain background, with appearance
// features from the rendered frames.
struct Scene {
    std::vector<BinaryMask> truth;
    std::vector<PatchFeatureGrid> feats;
};

Scene moving_object(std::size_t frames) {
    SceneSpec spec;
    spec.width = 320;
    spec.height = 240;
    spec.duration = 1.0;
    spec.frame_interval = 0.05;
    SceneObject o;
    o.width = 64;
    o.height = 48;
    o.position = {100, 90};
    o.motion.vx = 24;
    o.motion.vy = 12;
    o.texture_cell = 8;
    spec.objects = {o};
    Scene s;
    for (std::size_t k = 0; k < frames; ++k) {
        double const t = static_cast<double>(k) * spec.frame_interval;
        s.truth.push_back(object_supports(spec, t).front());
        s.feats.push_back(builtin_patch_descriptor(render_scene(spec, 1, t), kP));
    }
    return s;
}

} // namespace

TEST_SUITE("mask propagation") {
    TEST_CASE("identical features leave the mask unchanged") {
        test::Rng rng(1);
        for (int trial = 0; trial < 20; ++trial) {
            auto const f = test::random_features(rng, 6, 8, 16, kP);
            auto const m = test::random_mask(rng, 8 * kP, 6 * kP, 0.4);
            CHECK(propagate_mask(f, f, m) == m);
        }
    }

    TEST_CASE("translating features and mask by one patch translates the result") {
        test::Rng rng(2);
        int const rows = 8;
        int const cols = 10;
        std::vector<float> bg(6, 0.25f);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<std::uint8_t> obj(rows * cols, 0);
            for (int r = 3; r < 5; ++r)
                for (int c = 3; c < 6; ++c)
                    obj[static_cast<std::size_t>(r * cols + c)] = 1;
            auto const src = layered_features(rng, rows, cols, obj, bg);
            auto dst = src;
            std::vector<std::uint8_t> moved(rows * cols, 0);
            for (int i = 0; i < rows * cols; ++i)
                std::copy(bg.begin(), bg.end(), dst.patch(i).begin());
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    if (obj[static_cast<std::size_t>(r * cols + c)]) {
                        auto const from = src.patch(r, c);
                        std::copy(from.begin(), from.end(),
                                  dst.patch(r * cols + c + 1).begin());
                        moved[static_cast<std::size_t>(r * cols + c + 1)] = 1;
                    }
            auto const out =
                propagate_mask(src, dst, patch_mask(obj, rows, cols));
            CHECK(out == patch_mask(moved, rows, cols));
        }
    }

    TEST_CASE("empty source mask stays empty") {
        test::Rng rng(3);
        auto const a = test::random_features(rng, 4, 4, 8, kP);
        auto const b = test::random_features(rng, 4, 4, 8, kP);
        CHECK(count_set(propagate_mask(a, b, BinaryMask(32, 32))) == 0);
    }

    TEST_CASE("mismatched grids and bad configs are rejected") {
        test::Rng rng(4);
        auto const a = test::random_features(rng, 4, 4, 8, kP);
        auto const b = test::random_features(rng, 4, 5, 8, kP);
        CHECK_THROWS_AS((void)propagate_mask(a, b, BinaryMask(40, 32)),
                        InvalidArgument);
        CHECK_THROWS_AS((void)propagate_mask(a, a, BinaryMask(16, 16)),
                        InvalidArgument);
        DMRConfig bad;
        bad.theta = 1.0;
        CHECK_THROWS_AS((void)propagate_mask(a, a, BinaryMask(32, 32), bad),
                        InvalidArgument);
        bad = {};
        bad.top_k = 0;
        CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    }

    TEST_CASE("property: propagation keeps mask area within a factor of 2 on rigid translation") {
        auto const s = moving_object(20);
        for (std::size_t k = 1; k < s.truth.size(); ++k) {
            auto const prop = propagate_mask(s.feats[k - 1], s.feats[k],
                                             s.truth[k - 1]);
            double const a = static_cast<double>(count_set(prop));
            double const b = static_cast<double>(count_set(s.truth[k - 1]));
            CHECK(a >= b / 2);
            CHECK(a <= b * 2);
        }
    }
}

TEST_SUITE("coherence and keyframes") {
    TEST_CASE("static scene has zero loss everywhere") {
        test::Rng rng(5);
        auto const s = static_sequence(rng, 6, 5, 7);
        auto const l = coherence_losses(s.masks, s.feats);
        for (double v : l.per_frame)
            CHECK(v == 0.0);
        CHECK(l.mean == 0.0);
    }

    TEST_CASE("disagreeing half of the image gives loss 0.5, full inversion 1") {
        test::Rng rng(6);
        auto s = static_sequence(rng, 3, 4, 8);
        std::vector<std::uint8_t> left(32, 0);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                left[static_cast<std::size_t>(r * 8 + c)] = 1;
        std::vector<float> bg(6, 0.5f);
        auto const f = layered_features(rng, 4, 8, left, bg);
        s.feats.assign(3, f);
        auto const half = patch_mask(left, 4, 8);
        BinaryMask inverted = half;
        for (auto &v : inverted.data())
            v = 1 - v;
        s.masks.masks = {half, half, BinaryMask(64, 32)};
        CHECK(coherence_losses(s.masks, s.feats).per_frame[2] ==
              doctest::Approx(0.5));
        s.masks.masks = {half, half, inverted};
        CHECK(coherence_losses(s.masks, s.feats).per_frame[2] ==
              doctest::Approx(1.0));
    }

    TEST_CASE("single frame has loss 0; all-invalid input is an error") {
        test::Rng rng(7);
        auto s = static_sequence(rng, 1, 3, 3);
        auto const l = coherence_losses(s.masks, s.feats);
        CHECK(l.per_frame[0] == 0.0);
        CHECK(l.mean == 0.0);
        s.masks.valid[0] = 0;
        CHECK_THROWS_AS((void)coherence_losses(s.masks, s.feats),
                        InvalidArgument);
    }

    TEST_CASE("keyframe examples") {
        std::vector<double> a{0.5, 0.1, 0.5};
        CHECK(select_keyframe(a, (0.5 + 0.1 + 0.5) / 3) == 1);
        std::vector<double> b{0.3, 0.3, 0.3};
        CHECK(select_keyframe(b, 0.3) == 0);
        std::vector<double> c{0.4, 0.2, 0.25, 0.9};
        CHECK(select_keyframe(c, 0.4375) == 1);
        CHECK_THROWS_AS((void)select_keyframe(std::vector<double>{}, 0.0),
                        InvalidArgument);
    }

    TEST_CASE("property: keyframe choice is invariant to a constant shift") {
        test::Rng rng(8);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> l(static_cast<std::size_t>(rng.integer(1, 12)));
            for (auto &v : l)
                v = static_cast<double>(rng.integer(0, 20)) / 8.0;
            double mean = 0.0;
            for (double v : l)
                mean += v;
            mean /= static_cast<double>(l.size());
            double const shift = static_cast<double>(rng.integer(-16, 16)) / 4.0;
            auto shifted = l;
            for (auto &v : shifted)
                v += shift;
            CHECK(select_keyframe(l, mean) ==
                  select_keyframe(shifted, mean + shift));
        }
    }
}

TEST_SUITE("dynamic mask refinement") {
    TEST_CASE("coherent valid sequence is returned unchanged") {
        test::Rng rng(9);
        auto const s = static_sequence(rng, 7, 5, 6);
        auto const out = dynamic_mask_refinement(s.masks, s.feats);
        CHECK(out.masks == s.masks.masks);
        CHECK(std::all_of(out.valid.begin(), out.valid.end(),
                          [](auto v) { return v == 1; }));
    }

    TEST_CASE("a missing mask between good frames is recovered") {
        auto const s = moving_object(10);
        MaskSequence in;
        in.masks = s.truth;
        in.valid.assign(s.truth.size(), 1);
        in.masks[5] = BinaryMask(320, 240);
        in.valid[5] = 0;
        auto const out = dynamic_mask_refinement(in, s.feats);
        CHECK(iou(out.masks[5], s.truth[5]).value >= 0.8);
    }

    TEST_CASE("an invalid first frame is recovered backwards from the keyframe") {
        auto const s = moving_object(10);
        MaskSequence in;
        in.masks = s.truth;
        in.valid.assign(s.truth.size(), 1);
        in.masks[0] = BinaryMask(320, 240);
        in.valid[0] = 0;
        auto const out = dynamic_mask_refinement(in, s.feats);
        CHECK(iou(out.masks[0], s.truth[0]).value >= 0.8);
    }

    TEST_CASE("all-invalid sequence yields empty valid masks") {
        test::Rng rng(10);
        auto s = static_sequence(rng, 3, 3, 3);
        s.masks.valid.assign(3, 0);
        auto const out = dynamic_mask_refinement(s.masks, s.feats);
        for (auto const &m : out.masks)
            CHECK(count_set(m) == 0);
        CHECK(out.valid == std::vector<std::uint8_t>{1, 1, 1});
    }

    TEST_CASE("property: refinement is idempotent on coherent sequences") {
        test::Rng rng(11);
        for (int trial = 0; trial < 15; ++trial) {
            auto s = static_sequence(rng,
                                     static_cast<std::size_t>(rng.integer(1, 14)),
                                     static_cast<int>(rng.integer(3, 6)),
                                     static_cast<int>(rng.integer(3, 8)));
            DMRConfig cfg;
            cfg.window = static_cast<int>(rng.integer(1, 10));
            auto const once = dynamic_mask_refinement(s.masks, s.feats, cfg);
            auto const twice = dynamic_mask_refinement(once, s.feats, cfg);
            CHECK(once.masks == twice.masks);
            CHECK(once.masks == s.masks.masks);
        }
    }

    TEST_CASE("property: random sequences come back valid with matching shapes") {
        test::Rng rng(12);
        for (int trial = 0; trial < 10; ++trial) {
            std::size_t const n = static_cast<std::size_t>(rng.integer(1, 12));
            MaskSequence in;
            std::vector<PatchFeatureGrid> feats;
            for (std::size_t i = 0; i < n; ++i) {
                in.masks.push_back(test::random_mask(rng, 40, 32, 0.3));
                in.valid.push_back(rng.coin(0.7) ? 1 : 0);
                feats.push_back(test::random_features(rng, 4, 5, 6, kP));
            }
            auto const out = dynamic_mask_refinement(in, feats);
            REQUIRE(out.size() == n);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(out.valid[i] == 1);
                CHECK(out.masks[i].same_shape(in.masks[i]));
            }
        }
    }
}
