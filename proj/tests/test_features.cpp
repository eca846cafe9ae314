// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include "evseg/error.hpp"
#include "evseg/event_io.hpp"
#include "evseg/features.hpp"
#include "evseg/saliency.hpp"

#include <doctest.h>

#include <cmath>

using namespace evseg;

namespace {

RgbImage gray(int w, int h, std::uint8_t v) { return RgbImage(w, h, {v, v, v}); }

double norm(std::span<float const> v) {
    double s = 0.0;
    for (float x : v)
        s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

double cosine(std::span<float const> a, std::span<float const> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d += static_cast<double>(a[i]) * b[i];
    return d / (norm(a) * norm(b));
}

std::vector<double> histogram_direction(std::span<float const> v, int bins) {
    std::vector<double> h(v.begin(), v.begin() + bins);
    double s = 0.0;
    for (double x : h)
        s += x * x;
    for (double &x : h)
        x /= std::sqrt(s);
    return h;
}

void put_u32(std::vector<std::uint8_t> &b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

} // namespace

TEST_SUITE("feature grids") {
    TEST_CASE("patch grid of a 720x1280 frame with P=16 is 45x80") {
        auto const d = patch_grid_dims(720, 1280, 16);
        CHECK(d.rows == 45);
        CHECK(d.cols == 80);
        CHECK(d.count() == 3600);
        test::Rng rng(1);
        auto const g = test::random_features(rng, 45, 80, 4, 16);
        auto const back = decode_feature_grid(encode_feature_grid(g));
        CHECK(back.rows() == 45);
        CHECK(back.cols() == 80);
        CHECK(back.patch_size() == 16);
    }

    TEST_CASE("2x2x4 grid survives save and load bit-exactly") {
        test::Rng rng(2);
        test::TempDir dir("ftg");
        auto const g = test::random_features(rng, 2, 2, 4, 8);
        save_feature_grid(dir.str("g.ftg"), g);
        auto const back = load_feature_grid(dir.str("g.ftg"));
        CHECK(back == g);
        CHECK(back.source() == FeatureSource::external);
    }

    TEST_CASE("property: feature and flow files round trip") {
        test::Rng rng(3);
        for (int trial = 0; trial < 25; ++trial) {
            auto const g = test::random_features(
                rng, static_cast<int>(rng.integer(0, 9)),
                static_cast<int>(rng.integer(0, 9)),
                static_cast<int>(rng.integer(1, 40)),
                static_cast<int>(rng.integer(1, 32)));
            CHECK(decode_feature_grid(encode_feature_grid(g)) == g);
            FlowField f(static_cast<int>(rng.integer(1, 40)),
                        static_cast<int>(rng.integer(1, 40)));
            for (auto &v : f.u.data())
                v = static_cast<float>(rng.uniform(-5, 5));
            for (auto &v : f.v.data())
                v = static_cast<float>(rng.uniform(-5, 5));
            CHECK(decode_flow(encode_flow(f)) == f);
        }
    }

    TEST_CASE("truncation, bad magic and overflowing headers raise distinct errors") {
        test::Rng rng(4);
        auto bytes = encode_feature_grid(test::random_features(rng, 2, 2, 4, 8));
        auto truncated = bytes;
        truncated.resize(bytes.size() - 3);
        try {
            (void)decode_feature_grid(truncated);
            FAIL("expected TruncatedError");
        } catch (TruncatedError const &e) {
            CHECK(e.expected_bytes() == bytes.size());
            CHECK(e.actual_bytes() == bytes.size() - 3);
            CHECK(std::string(e.what()).find(std::to_string(bytes.size())) !=
                  std::string::npos);
        }
        auto foreign = bytes;
        foreign[3] = '2';
        CHECK_THROWS_AS((void)decode_feature_grid(foreign), FormatError);
        auto huge = bytes;
        put_u32(huge, 8, 0xFFFFFFFFu);
        CHECK_THROWS_AS((void)decode_feature_grid(huge), DimensionError);

        FlowField f(3, 2);
        auto fb = encode_flow(f);
        fb.pop_back();
        CHECK_THROWS_AS((void)decode_flow(fb), TruncatedError);
    }
}

TEST_SUITE("builtin descriptor") {
    TEST_CASE("uniform gray frame gives identical unit patch vectors") {
        auto const g = builtin_patch_descriptor(gray(64, 48, 90), 16);
        CHECK(g.dim() == 8 + 3 + 1);
        for (int i = 0; i < g.count(); ++i) {
            CHECK(norm(g.patch(i)) == doctest::Approx(1.0).epsilon(1e-6));
            for (int k = 0; k < g.dim(); ++k)
                CHECK(g.patch(i)[k] == g.patch(0)[k]);
            for (int k = 0; k < 8; ++k)
                CHECK(g.patch(i)[k] == 0.0f);
            CHECK(g.patch(i)[8] != 0.0f);
        }
    }

    TEST_CASE("mid-gray patch is not a zero vector") {
        auto const g = builtin_patch_descriptor(gray(16, 16, 128), 16);
        CHECK(norm(g.patch(0)) == doctest::Approx(1.0).epsilon(1e-6));
    }

    TEST_CASE("vertical step edge puts histogram mass in the horizontal-gradient bin") {
        auto img = gray(16, 16, 40);
        for (int y = 0; y < 16; ++y)
            for (int x = 8; x < 16; ++x)
                img(x, y) = {200, 200, 200};
        auto const g = builtin_patch_descriptor(img, 16);
        auto const p = g.patch(0);
        CHECK(p[0] > 0.0f);
        for (int k = 1; k < 8; ++k)
            CHECK(p[k] == 0.0f);
    }

    TEST_CASE("global intensity scale leaves the histogram direction unchanged") {
        test::Rng rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            RgbImage a(32, 32);
            RgbImage b(32, 32);
            for (std::size_t i = 0; i < a.size(); ++i) {
                auto const v = static_cast<std::uint8_t>(2 * rng.integer(0, 127));
                a.data()[i] = {v, v, v};
                auto const h = static_cast<std::uint8_t>(v / 2);
                b.data()[i] = {h, h, h};
            }
            auto const ga = builtin_patch_descriptor(a, 16);
            auto const gb = builtin_patch_descriptor(b, 16);
            for (int i = 0; i < ga.count(); ++i) {
                auto const ha = histogram_direction(ga.patch(i), 8);
                auto const hb = histogram_direction(gb.patch(i), 8);
                for (int k = 0; k < 8; ++k)
                    CHECK(ha[static_cast<std::size_t>(k)] ==
                          doctest::Approx(hb[static_cast<std::size_t>(k)])
                              .epsilon(1e-5));
            }
        }
    }

    TEST_CASE("invalid arguments are rejected") {
        auto const img = gray(16, 16, 10);
        CHECK_THROWS_AS((void)builtin_patch_descriptor(img, 3), InvalidArgument);
        CHECK_THROWS_AS((void)builtin_patch_descriptor(img, 8, 3),
                        InvalidArgument);
        CHECK_THROWS_AS((void)builtin_patch_descriptor(img, 32), InvalidArgument);
        CHECK_THROWS_AS((void)builtin_patch_descriptor(img, 8, 8, 3),
                        InvalidArgument);
    }

    TEST_CASE("property: descriptors are deterministic and unit length") {
        test::Rng rng(6);
        for (int trial = 0; trial < 10; ++trial) {
            RgbImage img(48, 32);
            for (auto &px : img.data())
                px = {static_cast<std::uint8_t>(rng.integer(0, 255)),
                      static_cast<std::uint8_t>(rng.integer(0, 255)),
                      static_cast<std::uint8_t>(rng.integer(0, 255))};
            int const cells = rng.coin() ? 1 : 2;
            auto const a = builtin_patch_descriptor(img, 16, 8, cells);
            auto const b = builtin_patch_descriptor(img, 16, 8, cells);
            CHECK(a == b);
            CHECK(a.dim() == cells * cells * 11 + 1);
            for (int i = 0; i < a.count(); ++i)
                CHECK(norm(a.patch(i)) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_SUITE("flow features") {
    TEST_CASE("zero flow gives identical vectors") {
        auto const g = flow_features(FlowField(64, 32), 16);
        for (int i = 1; i < g.count(); ++i)
            CHECK(std::equal(g.patch(i).begin(), g.patch(i).end(),
                             g.patch(0).begin()));
        CHECK(norm(g.patch(0)) == doctest::Approx(1.0));
    }

    TEST_CASE("uniform flow gives cosine similarity 1 between any pair") {
        auto const f = synth_flow_from_motion({1.0, 0.0, 0.0, 0.0}, 32, 64, 1.0);
        auto const g = flow_features(f, 16);
        auto const w = cosine_similarity_matrix(g).values;
        for (int i = 0; i < g.count(); ++i)
            for (int j = 0; j < g.count(); ++j)
                CHECK(w(i, j) == doctest::Approx(1.0).epsilon(1e-6));
    }

    TEST_CASE("opposing halves are less similar across than within") {
        FlowField f(64, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 64; ++x)
                f.u(x, y) = x < 32 ? 1.0f : -1.0f;
        auto const g = flow_features(f, 16);
        // Patches 0,1 / 4,5 on the left; 2,3 / 6,7 on the right.
        double const within = cosine(g.patch(0), g.patch(1));
        double const across = cosine(g.patch(0), g.patch(2));
        CHECK(across < within);
        CHECK(cosine(g.patch(2), g.patch(3)) > across);
    }

    TEST_CASE("property: every flow patch vector is unit length") {
        test::Rng rng(7);
        for (int trial = 0; trial < 10; ++trial) {
            FlowField f(48, 32);
            for (auto &v : f.u.data())
                v = static_cast<float>(rng.uniform(-3, 3));
            for (auto &v : f.v.data())
                v = static_cast<float>(rng.uniform(-3, 3));
            auto const g = flow_features(f, 8);
            for (int i = 0; i < g.count(); ++i)
                CHECK(norm(g.patch(i)) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_SUITE("motion flow") {
    TEST_CASE("translation (2,3) over 1 s is constant flow (2,3)") {
        auto const f = synth_flow_from_motion({2.0, 3.0, 0.0, 0.0}, 10, 12, 1.0);
        for (std::size_t i = 0; i < f.u.size(); ++i) {
            CHECK(f.u.data()[i] == 2.0f);
            CHECK(f.v.data()[i] == 3.0f);
        }
    }

    TEST_CASE("zero motion gives zero flow") {
        auto const f = synth_flow_from_motion({}, 10, 12, 0.5);
        for (std::size_t i = 0; i < f.u.size(); ++i) {
            CHECK(f.u.data()[i] == 0.0f);
            CHECK(f.v.data()[i] == 0.0f);
        }
        CHECK_THROWS_AS((void)synth_flow_from_motion({}, 10, 12, 0.0),
                        InvalidArgument);
    }

    TEST_CASE("zoom-only motion gives radial flow growing linearly from the centre") {
        int const w = 21;
        int const h = 11;
        auto const f = synth_flow_from_motion({0.0, 0.0, 0.5, 0.0}, h, w, 1.0);
        Point2 const c = sensor_center(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                CHECK(f.u(x, y) ==
                      doctest::Approx(0.5 * (x - c.x)).epsilon(1e-6));
                CHECK(f.v(x, y) ==
                      doctest::Approx(0.5 * (y - c.y)).epsilon(1e-6));
            }
        CHECK(f.u(10, 5) == 0.0f);
        CHECK(f.v(10, 5) == 0.0f);
    }
}
