// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include "evseg/error.hpp"
#include "evseg/event_io.hpp"
#include "evseg/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace evseg;

namespace {

SceneSpec small_scene() {
    SceneSpec s;
    s.width = 160;
    s.height = 120;
    s.duration = 0.5;
    s.frame_interval = 0.1;
    SceneObject o;
    o.width = 30;
    o.height = 20;
    o.position = {50, 60};
    o.motion = {40, 0, 0, 0};
    o.texture_cell = 5;
    s.objects = {o};
    return s;
}

} // namespace

TEST_SUITE("synthetic scenes") {
    TEST_CASE("a static scene emits no events") {
        auto s = small_scene();
        s.objects[0].motion = {};
        s.background_cell = 8;
        auto const r = generate_scene(s, 1);
        CHECK(r.stream.events.empty());
        CHECK(r.frame_times.size() == 5);
    }

    TEST_CASE("uniform bar emits one event per edge pixel crossing") {
        SceneSpec s;
        s.width = 200;
        s.height = 100;
        s.duration = 1.0;
        SceneObject bar;
        bar.shape = ShapeKind::bar;
        bar.width = 10;
        bar.height = 40;
        bar.position = {60, 50};
        bar.motion = {50, 0, 0, 0};
        s.objects = {bar};
        auto const r = generate_scene(s, 1);
        double const expected = 2.0 * 40 * 50;
        CHECK(std::abs(static_cast<double>(r.stream.events.size()) - expected) <=
              0.05 * expected);
        int pos = 0;
        for (auto const &e : r.stream.events)
            pos += e.polarity > 0;
        CHECK(std::abs(2 * pos - static_cast<int>(r.stream.events.size())) <=
              0.05 * expected);
    }

    TEST_CASE("generation is deterministic for a seed") {
        auto s = small_scene();
        s.noise_rate = 0.01;
        s.background_cell = 6;
        s.ego = {5, -3, 0, 0};
        auto const a = generate_scene(s, 9);
        auto const b = generate_scene(s, 9);
        CHECK(a.stream.events == b.stream.events);
        CHECK(a.labels == b.labels);
        auto const c = generate_scene(s, 10);
        CHECK_FALSE(a.stream.events == c.stream.events);
        CHECK(std::is_sorted(a.stream.events.begin(), a.stream.events.end(),
                             [](Event const &l, Event const &r) { return l.t < r.t; }));
    }

    TEST_CASE("flow is the analytic per-frame displacement") {
        auto s = small_scene();
        s.ego = {10, 5, 0, 0};
        s.background_cell = 6;
        auto const r = generate_scene(s, 2);
        REQUIRE(r.flows.size() == r.masks.size());
        for (std::size_t k = 0; k < r.flows.size(); ++k) {
            auto const &f = r.flows[k];
            for (int y = 0; y < s.height; y += 7)
                for (int x = 0; x < s.width; x += 7) {
                    bool const obj = r.masks[k](x, y) == 1;
                    CHECK(f.u(x, y) == doctest::Approx(obj ? 4.0 : 1.0));
                    CHECK(f.v(x, y) == doctest::Approx(obj ? 0.0 : 0.5));
                }
        }
        CHECK(r.object_motions.size() == 1);
        CHECK(r.ego == s.ego);
    }

    TEST_CASE("noise events carry label 0") {
        SceneSpec s;
        s.width = 100;
        s.height = 100;
        s.duration = 1.0;
        s.noise_rate = 0.05;
        auto const r = generate_scene(s, 3);
        double const n = static_cast<double>(r.stream.events.size());
        CHECK(std::abs(n - 500.0) < 5 * std::sqrt(500.0));
        for (auto l : r.labels)
            CHECK(l == 0);
    }

    TEST_CASE("property: labels are consistent with object supports") {
        test::Rng rng(4);
        for (int trial = 0; trial < 5; ++trial) {
            SceneSpec s;
            s.width = 120;
            s.height = 90;
            s.duration = 0.3;
            s.noise_rate = rng.uniform(0.0, 0.01);
            int const n = static_cast<int>(rng.integer(1, 3));
            for (int k = 0; k < n; ++k) {
                SceneObject o;
                o.shape = static_cast<ShapeKind>(rng.integer(0, 2));
                o.width = rng.uniform(10, 25);
                o.height = rng.uniform(10, 25);
                o.position = {rng.uniform(20, 100), rng.uniform(20, 70)};
                o.motion = {rng.uniform(-40, 40), rng.uniform(-40, 40), 0, 0};
                o.texture_cell = rng.coin() ? 4.0 : 0.0;
                s.objects.push_back(o);
            }
            auto const r = generate_scene(s, rng.next());
            REQUIRE(r.labels.size() == r.stream.events.size());
            for (auto l : r.labels)
                CHECK(l <= n);
            auto const gt = ground_truth_labeled(r);
            CHECK(gt.events.size() == r.stream.events.size());
            CHECK(gt.motions.size() == static_cast<std::size_t>(n) + 1);
            for (std::size_t i = 0; i < gt.events.size(); ++i)
                CHECK(gt.events[i].label == r.labels[i]);
            for (std::size_t k = 0; k < r.masks.size(); ++k) {
                BinaryMask u(s.width, s.height);
                for (auto const &m : r.object_masks[k])
                    u = mask_union(u, m);
                CHECK(u == r.masks[k]);
            }
        }
    }

    TEST_CASE("scene JSON round-trips") {
        auto s = small_scene();
        s.ego = {1.5, -2, 0.1, 0.05};
        s.noise_rate = 0.002;
        s.background_cell = 7;
        s.objects[0].shape = ShapeKind::disc;
        s.objects[0].contrast = -1;
        auto const text = scene_spec_to_json(s, 42);
        auto const back = scene_spec_from_json(text);
        CHECK(scene_spec_to_json(back, 42) == text);
        CHECK(scene_seed_from_json(text, 1) == 42);
        CHECK(scene_seed_from_json("{}", 5) == 5);
        CHECK(back.objects.at(0).shape == ShapeKind::disc);
        CHECK(back.ego == s.ego);
    }

    TEST_CASE("degenerate specs are rejected") {
        auto s = small_scene();
        s.width = 0;
        CHECK_THROWS_AS(s.validate(), InvalidArgument);
        s = small_scene();
        s.duration = -1;
        CHECK_THROWS_AS((void)generate_scene(s, 1), InvalidArgument);
        s = small_scene();
        s.objects[0].contrast = 0;
        CHECK_THROWS_AS(s.validate(), InvalidArgument);
        CHECK_THROWS((void)scene_spec_from_json("{not json"));
    }

    TEST_CASE("write_scene lays out the scene directory") {
        test::TempDir dir("synth");
        auto const s = small_scene();
        auto const r = generate_scene(s, 5);
        write_scene(dir.str(), s, r, 5);
        namespace fs = std::filesystem;
        for (auto const *f : {"events.evs", "gt_labels.evl", "scene.json",
                              "masks/mask_000000.pgm", "flow/flow_000004.flw",
                              "gt/window_000000_obj_1.pgm"})
            CHECK_MESSAGE(fs::exists(dir.path() / f), f);
        auto const ev = read_events(dir.str("events.evs"), 0, 0);
        CHECK(ev.events == r.stream.events);
        CHECK(read_pgm_mask(dir.str("masks/mask_000002.pgm")) == r.masks[2]);
    }
}
