// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include "evseg/error.hpp"
#include "evseg/grid.hpp"

#include <doctest.h>

#include <filesystem>

using namespace evseg;

TEST_SUITE("grid") {
    TEST_CASE("dilation examples") {
        BinaryMask m(9, 9);
        m(4, 4) = 1;
        CHECK(count_set(dilate_disc(m, 0)) == 1);
        CHECK(count_set(dilate_disc(m, 1)) == 5);
        CHECK(count_set(dilate_disc(m, 2)) == 13);
        BinaryMask corner(5, 5);
        corner(0, 0) = 1;
        CHECK(count_set(dilate_disc(corner, 1)) == 3);
    }

    TEST_CASE("union and counting") {
        auto const a = test::rect_mask(10, 10, 0, 0, 5, 5);
        auto const b = test::rect_mask(10, 10, 3, 3, 5, 5);
        CHECK(count_set(mask_union(a, b)) == 25 + 25 - 4);
        CHECK_THROWS((void)mask_union(a, BinaryMask(3, 3)));
        CHECK_THROWS_AS(BinaryMask(-1, 2), InvalidArgument);
    }

    TEST_CASE("gaussian blur keeps constants and mass") {
        ScalarField f(20, 15, 3.0);
        auto const g = gaussian_blur(f, 1.5);
        for (double v : g.data())
            CHECK(v == doctest::Approx(3.0));
        CHECK(gaussian_blur(f, 0.0) == f);
    }

    TEST_CASE("PGM masks round-trip; images are written") {
        test::TempDir dir("grid");
        test::Rng rng(1);
        auto const m = test::random_mask(rng, 33, 17, 0.4);
        write_pgm_mask(dir.str("m.pgm"), m);
        CHECK(read_pgm_mask(dir.str("m.pgm")) == m);
        ScalarField f(8, 8);
        f(3, 3) = 2.0;
        write_png_scaled(dir.str("f.png"), f);
        CHECK(std::filesystem::file_size(dir.str("f.png")) > 8);
        CHECK_THROWS((void)read_pgm_mask(dir.str("missing.pgm")));
    }

    TEST_CASE("property: dilation is extensive and monotone") {
        test::Rng rng(2);
        for (int trial = 0; trial < 50; ++trial) {
            auto const m = test::random_mask(rng, 20, 14, rng.uniform(0, 0.2));
            auto prev = m;
            for (int r = 1; r < 4; ++r) {
                auto const d = dilate_disc(m, r);
                for (std::size_t i = 0; i < m.size(); ++i)
                    CHECK(d.data()[i] >= prev.data()[i]);
                prev = d;
            }
        }
    }
}
