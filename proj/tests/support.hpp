// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded generators and fixtures shared by the test suites.

#pragma once

#include "evseg/event.hpp"
#include "evseg/features.hpp"
#include "evseg/grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iterator>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

namespace evseg::test {

/// splitmix64; small, fast and reproducible across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    /// Uniform integer in [lo, hi].
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        auto const span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next() % span);
    }
    bool coin(double p = 0.5) { return unit() < p; }

  private:
    std::uint64_t state_;
};

inline std::vector<Event> random_events(Rng &rng, std::size_t n, int width,
                                        int height, Timestamp t0,
                                        Timestamp t1) {
    std::vector<Event> ev(n);
    for (auto &e : ev) {
        e.t = static_cast<Timestamp>(rng.integer(
            static_cast<std::int64_t>(t0), static_cast<std::int64_t>(t1) - 1));
        e.x = static_cast<std::uint16_t>(rng.integer(0, width - 1));
        e.y = static_cast<std::uint16_t>(rng.integer(0, height - 1));
        e.polarity = rng.coin() ? 1 : -1;
    }
    std::stable_sort(ev.begin(), ev.end(),
                     [](Event const &a, Event const &b) { return a.t < b.t; });
    return ev;
}

/// Events from `dots` random texture points inside the rectangle
/// (x0, y0, w, h) at time 0, each translating with (vx, vy) px/s and firing
/// `per_dot` times uniformly over [t0, t1). Off-sensor events are dropped.
inline std::vector<Event> moving_points(Rng &rng, int dots, int per_dot,
                                        double x0, double y0, double w,
                                        double h, double vx, double vy,
                                        int width, int height, Timestamp t0,
                                        Timestamp t1) {
    std::vector<Event> ev;
    for (int d = 0; d < dots; ++d) {
        double const px = rng.uniform(x0, x0 + w);
        double const py = rng.uniform(y0, y0 + h);
        for (int k = 0; k < per_dot; ++k) {
            auto const t = static_cast<Timestamp>(
                rng.integer(static_cast<std::int64_t>(t0),
                            static_cast<std::int64_t>(t1) - 1));
            double const s = static_cast<double>(t) * 1e-6;
            long const x = std::lround(px + vx * s);
            long const y = std::lround(py + vy * s);
            if (x < 0 || y < 0 || x >= width || y >= height)
                continue;
            ev.push_back({t, static_cast<std::uint16_t>(x),
                          static_cast<std::uint16_t>(y),
                          static_cast<std::int8_t>(rng.coin() ? 1 : -1)});
        }
    }
    std::stable_sort(ev.begin(), ev.end(),
                     [](Event const &a, Event const &b) { return a.t < b.t; });
    return ev;
}

/// Time-ordered merge of two sorted event vectors.
inline std::vector<Event> merge_events(std::vector<Event> const &a,
                                       std::vector<Event> const &b) {
    std::vector<Event> out;
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
               [](Event const &l, Event const &r) { return l.t < r.t; });
    return out;
}

inline BinaryMask random_mask(Rng &rng, int width, int height, double p) {
    BinaryMask m(width, height);
    for (auto &v : m.data())
        v = rng.coin(p) ? 1 : 0;
    return m;
}

inline BinaryMask rect_mask(int width, int height, int x0, int y0, int w,
                            int h) {
    BinaryMask m(width, height);
    for (int y = std::max(0, y0); y < std::min(height, y0 + h); ++y)
        for (int x = std::max(0, x0); x < std::min(width, x0 + w); ++x)
            m(x, y) = 1;
    return m;
}

inline PatchFeatureGrid random_features(Rng &rng, int rows, int cols, int dim,
                                        int patch) {
    PatchFeatureGrid g(rows, cols, dim, patch, FeatureSource::external);
    for (auto &v : g.data())
        v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return g;
}

/// K nodes split into `blocks` contiguous groups; intra-block weights drawn
/// from [0.7, 1], inter-block weights from [0, 0.05]. Diagonal 1.
inline Eigen::MatrixXd block_graph(Rng &rng, int k, int blocks) {
    std::vector<int> owner(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        owner[static_cast<std::size_t>(i)] = i * blocks / k;
    Eigen::MatrixXd w(k, k);
    for (int i = 0; i < k; ++i) {
        w(i, i) = 1.0;
        for (int j = i + 1; j < k; ++j) {
            bool const same = owner[static_cast<std::size_t>(i)] ==
                              owner[static_cast<std::size_t>(j)];
            double const v =
                same ? rng.uniform(0.7, 1.0) : rng.uniform(0.0, 0.05);
            w(i, j) = w(j, i) = v;
        }
    }
    return w;
}

/// Fresh empty directory under the system temp dir, removed on scope exit.
class TempDir {
  public:
    explicit TempDir(std::string const &tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("evseg_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(TempDir const &) = delete;
    TempDir &operator=(TempDir const &) = delete;

    [[nodiscard]] std::filesystem::path const &path() const { return path_; }
    [[nodiscard]] std::string str(std::string const &leaf = {}) const {
        return leaf.empty() ? path_.string() : (path_ / leaf).string();
    }

  private:
    std::filesystem::path path_;
};

} // namespace evseg::test
