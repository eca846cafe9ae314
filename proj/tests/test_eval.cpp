// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include "evseg/error.hpp"
#include "evseg/eval.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace evseg;

namespace {

std::string slurp(std::string const &path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

BinaryMask rect(int x, int y, int w, int h) {
    return test::rect_mask(40, 30, x, y, w, h);
}

} // namespace

TEST_SUITE("iou") {
    TEST_CASE("examples") {
        CHECK(iou(rect(0, 0, 10, 10), rect(0, 0, 10, 10)).value == 1.0);
        CHECK(iou(rect(0, 0, 10, 10), rect(20, 0, 10, 10)).value == 0.0);
        CHECK(iou(rect(0, 0, 10, 10), rect(5, 0, 10, 10)).value ==
              doctest::Approx(50.0 / 150.0));
        auto const e = iou(BinaryMask(40, 30), BinaryMask(40, 30));
        CHECK(e.both_empty);
        CHECK(e.value == 1.0);
        CHECK_THROWS_AS((void)iou(BinaryMask(4, 4), BinaryMask(4, 5)),
                        DimensionError);
    }

    TEST_CASE("property: symmetric and bounded") {
        test::Rng rng(1);
        for (int trial = 0; trial < 200; ++trial) {
            auto const a = test::random_mask(rng, 12, 9, rng.unit());
            auto const b = test::random_mask(rng, 12, 9, rng.unit());
            double const ab = iou(a, b).value;
            CHECK(ab == iou(b, a).value);
            CHECK(ab >= 0.0);
            CHECK(ab <= 1.0);
            if (count_set(a) > 0)
                CHECK(iou(a, a).value == 1.0);
        }
    }
}

TEST_SUITE("detection") {
    TEST_CASE("perfect, missing and partial detections") {
        std::vector<FrameMasks> gt{{rect(0, 0, 10, 10), rect(20, 10, 10, 10)},
                                   {rect(5, 5, 10, 10)}};
        auto const perfect = detection_rate(gt, gt);
        CHECK(perfect.rate == 100.0);
        CHECK(perfect.detected == 3);
        CHECK(perfect.total == 3);
        CHECK(perfect.mean_iou == 1.0);

        std::vector<FrameMasks> none{{}, {}};
        auto const zero = detection_rate(none, gt);
        CHECK(zero.rate == 0.0);
        CHECK(zero.mean_iou == 0.0);

        std::vector<FrameMasks> two{{rect(0, 0, 10, 10)}, {rect(5, 5, 10, 10)}};
        CHECK(detection_rate(two, gt).rate == doctest::Approx(200.0 / 3.0));
    }

    TEST_CASE("frame count mismatch and bad thresholds are rejected") {
        std::vector<FrameMasks> a(2), b(3);
        CHECK_THROWS_AS((void)detection_rate(a, b), InvalidArgument);
        DetectionConfig c;
        c.iou_threshold = 1.5;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
    }

    TEST_CASE("greedy matching is one-to-one") {
        std::vector<BinaryMask> gt{rect(0, 0, 10, 10)};
        std::vector<BinaryMask> pred{rect(0, 0, 10, 10), rect(1, 0, 10, 10)};
        auto const m = greedy_match(pred, gt);
        REQUIRE(m.size() == 1);
        CHECK(m[0].pred == 0);
        CHECK(m[0].iou == 1.0);
        std::vector<BinaryMask> far{rect(30, 20, 5, 5)};
        CHECK(greedy_match(far, gt).empty());
    }

    TEST_CASE("property: matches never reuse an index") {
        test::Rng rng(2);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<BinaryMask> p, g;
            for (int i = 0, n = static_cast<int>(rng.integer(0, 5)); i < n; ++i)
                p.push_back(test::random_mask(rng, 10, 10, rng.uniform(0.05, 0.5)));
            for (int i = 0, n = static_cast<int>(rng.integer(0, 5)); i < n; ++i)
                g.push_back(test::random_mask(rng, 10, 10, rng.uniform(0.05, 0.5)));
            auto const m = greedy_match(p, g);
            std::vector<int> used_p(p.size()), used_g(g.size());
            for (auto const &x : m) {
                CHECK(++used_p[x.pred] == 1);
                CHECK(++used_g[x.gt] == 1);
                CHECK(x.iou > 0.0);
                CHECK(x.iou == iou(p[x.pred], g[x.gt]).value);
            }
        }
    }

    TEST_CASE("property: detection rate is monotone in the threshold") {
        test::Rng rng(3);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<FrameMasks> p(3), g(3);
            for (std::size_t f = 0; f < 3; ++f) {
                for (int i = 0, n = static_cast<int>(rng.integer(0, 3)); i < n; ++i)
                    p[f].push_back(test::random_mask(rng, 8, 8, 0.5));
                for (int i = 0, n = static_cast<int>(rng.integer(1, 3)); i < n; ++i)
                    g[f].push_back(test::random_mask(rng, 8, 8, 0.5));
            }
            double prev = 101.0;
            for (double t : {0.05, 0.1, 0.3, 0.5, 0.7, 1.0}) {
                DetectionConfig c;
                c.iou_threshold = t;
                double const r = detection_rate(p, g, c).rate;
                CHECK(r <= prev);
                CHECK(r >= 0.0);
                prev = r;
            }
        }
    }
}

TEST_SUITE("masks on disk and reports") {
    TEST_CASE("event label masks skip label 0") {
        std::vector<LabeledEvent> ev(3);
        ev[0].event = {0, 1, 1, 1};
        ev[0].label = 0;
        ev[1].event = {1, 2, 3, 1};
        ev[1].label = 2;
        ev[2].event = {2, 2, 3, -1};
        ev[2].label = 2;
        auto const m = event_label_masks(ev, 5, 5);
        REQUIRE(m.size() == 1);
        CHECK(count_set(m.at(2)) == 1);
        CHECK(m.at(2)(2, 3) == 1);
    }

    TEST_CASE("directories are scored window by window") {
        test::TempDir pred("pred"), gt("gt");
        write_pgm_mask(gt.str("window_000000_obj_1.pgm"), rect(0, 0, 10, 10));
        write_pgm_mask(gt.str("window_000001_obj_1.pgm"), rect(0, 0, 10, 10));
        write_pgm_mask(gt.str("window_000001_obj_2.pgm"), rect(20, 10, 10, 10));
        write_pgm_mask(pred.str("window_000001_obj_4.pgm"), rect(20, 10, 10, 10));
        write_pgm_mask(pred.str("window_000007_obj_1.pgm"), rect(0, 0, 10, 10));
        auto const loaded = load_window_masks(gt.str());
        CHECK(loaded.size() == 2);
        CHECK(loaded.at(1).size() == 2);
        auto const r = score_directories(pred.str(), gt.str());
        CHECK(r.total == 3);
        CHECK(r.detected == 1);
        CHECK(r.rate == doctest::Approx(100.0 / 3.0));
    }

    TEST_CASE("reports are written as JSON and CSV") {
        test::TempDir dir("report");
        std::vector<ReportRow> rows{{"seq", "detection_rate", 87.5},
                                    {"seq", "mean_iou", 0.25}};
        write_report_json(dir.str("r.json"), rows);
        write_report_csv(dir.str("r.csv"), rows);
        CHECK(slurp(dir.str("r.csv")) ==
              "sequence,metric,value\nseq,detection_rate,87.500000\n"
              "seq,mean_iou,0.250000\n");
        auto const j = slurp(dir.str("r.json"));
        CHECK(j.find("\"metric\": \"detection_rate\"") != std::string::npos);
        CHECK(j.find("87.5") != std::string::npos);
        CHECK_THROWS_AS(write_report_csv(dir.str("no/such/dir.csv"), rows), IoError);
    }
}
