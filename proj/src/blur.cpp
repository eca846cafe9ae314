// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/blur.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>

namespace evseg {

void BlurOptions::validate() const {
    if (num_scales < 1)
        throw InvalidArgument("num_scales must be >= 1");
    if (block < 8 || (block & (block - 1)) != 0)
        throw InvalidArgument("block must be a power of two >= 8");
    if (stride < 0)
        throw InvalidArgument("stride must be >= 0");
}

namespace {

int reflect101(int i, int n) {
    if (n == 1)
        return 0;
    int const period = 2 * (n - 1);
    i %= period;
    if (i < 0)
        i += period;
    return i < n ? i : period - i;
}

Eigen::MatrixXd dct_matrix(int n) {
    Eigen::MatrixXd c(n, n);
    for (int k = 0; k < n; ++k) {
        double const a = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int i = 0; i < n; ++i)
            c(k, i) = a * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
    }
    return c;
}

// Bilinear interpolation of samples taken at `xs` x `ys` (monotone pixel
// positions) onto every pixel of a width x height grid.
ScalarField interpolate_centres(Eigen::MatrixXd const &samples,
                                std::vector<int> const &xs,
                                std::vector<int> const &ys, int width,
                                int height) {
    ScalarField out(width, height);
    auto bracket = [](std::vector<int> const &pos, int p, int &i0, double &f) {
        auto it = std::upper_bound(pos.begin(), pos.end(), p);
        int hi = static_cast<int>(it - pos.begin());
        if (hi == 0) {
            i0 = 0;
            f = 0.0;
        } else if (hi == static_cast<int>(pos.size())) {
            i0 = static_cast<int>(pos.size()) - 1;
            f = 0.0;
        } else {
            i0 = hi - 1;
            f = static_cast<double>(p - pos[i0]) / (pos[hi] - pos[i0]);
        }
    };
    for (int y = 0; y < height; ++y) {
        int r0;
        double fy;
        bracket(ys, y, r0, fy);
        int const r1 = std::min(r0 + 1, static_cast<int>(ys.size()) - 1);
        for (int x = 0; x < width; ++x) {
            int c0;
            double fx;
            bracket(xs, x, c0, fx);
            int const c1 = std::min(c0 + 1, static_cast<int>(xs.size()) - 1);
            double const top = (1 - fx) * samples(r0, c0) + fx * samples(r0, c1);
            double const bot = (1 - fx) * samples(r1, c0) + fx * samples(r1, c1);
            out(x, y) = (1 - fy) * top + fy * bot;
        }
    }
    return out;
}

std::vector<int> centre_positions(int n, int stride) {
    std::vector<int> pos;
    for (int p = 0; p < n; p += stride)
        pos.push_back(p);
    if (pos.back() != n - 1)
        pos.push_back(n - 1);
    return pos;
}

ScalarField high_frequency_map(ScalarField const &img, int block, int stride) {
    int const w = img.width();
    int const h = img.height();
    Eigen::MatrixXd const c = dct_matrix(block);
    auto const xs = centre_positions(w, stride);
    auto const ys = centre_positions(h, stride);
    Eigen::MatrixXd samples(ys.size(), xs.size());
    Eigen::MatrixXd patch(block, block);
    int const half = block / 2;
    double const area = static_cast<double>(block) * block;
    for (std::size_t r = 0; r < ys.size(); ++r) {
        for (std::size_t q = 0; q < xs.size(); ++q) {
            bool nonzero = false;
            for (int i = 0; i < block; ++i) {
                int const yy = reflect101(ys[r] - half + i, h);
                for (int j = 0; j < block; ++j) {
                    double const v = img(reflect101(xs[q] - half + j, w), yy);
                    patch(i, j) = v;
                    nonzero = nonzero || v != 0.0;
                }
            }
            if (!nonzero) {
                samples(r, q) = 0.0;
                continue;
            }
            Eigen::MatrixXd const coef = c * patch * c.transpose();
            double hf = 0.0;
            for (int i = 0; i < block; ++i)
                for (int j = std::max(0, half + 1 - i); j < block; ++j)
                    hf += std::abs(coef(i, j));
            samples(r, q) = hf / area;
        }
    }
    return interpolate_centres(samples, xs, ys, w, h);
}

ScalarField downsample_box(ScalarField const &img, int factor) {
    int const w = std::max(1, img.width() / factor);
    int const h = std::max(1, img.height() / factor);
    ScalarField out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            int n = 0;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) {
                    int const sx = x * factor + dx;
                    int const sy = y * factor + dy;
                    if (img.contains(sx, sy)) {
                        acc += img(sx, sy);
                        ++n;
                    }
                }
            out(x, y) = n ? acc / n : 0.0;
        }
    return out;
}

ScalarField upsample_bilinear(ScalarField const &img, int width, int height) {
    ScalarField out(width, height);
    double const sx = static_cast<double>(img.width()) / width;
    double const sy = static_cast<double>(img.height()) / height;
    for (int y = 0; y < height; ++y) {
        double const fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        int const y0 = static_cast<int>(fy);
        int const y1 = std::min(y0 + 1, img.height() - 1);
        double const ay = fy - y0;
        for (int x = 0; x < width; ++x) {
            double const fx =
                std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            int const x0 = static_cast<int>(fx);
            int const x1 = std::min(x0 + 1, img.width() - 1);
            double const ax = fx - x0;
            out(x, y) = (1 - ay) * ((1 - ax) * img(x0, y0) + ax * img(x1, y0)) +
                        ay * ((1 - ax) * img(x0, y1) + ax * img(x1, y1));
        }
    }
    return out;
}

} // namespace

BlurMap dct_sharpness_map(ScalarField const &image, BlurOptions const &opt) {
    opt.validate();
    if (image.width() < opt.block || image.height() < opt.block)
        throw InvalidArgument("image smaller than the DCT block");
    int const w = image.width();
    int const h = image.height();

    double mean_abs = 0.0;
    for (double v : image.data())
        mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(image.size());

    BlurMap bm;
    bm.raw = ScalarField(w, h, 0.0);
    for (int s = 0; s < opt.num_scales; ++s) {
        int const factor = 1 << s;
        int const block = opt.downsample ? opt.block : opt.block * factor;
        int const stride = opt.stride > 0 ? opt.stride : std::max(1, block / 4);
        bm.block_sizes.push_back(block);
        if (mean_abs == 0.0)
            continue;
        ScalarField hf;
        if (opt.downsample && factor > 1) {
            auto const small = downsample_box(image, factor);
            if (small.width() < 2 || small.height() < 2)
                continue;
            hf = upsample_bilinear(high_frequency_map(small, block, stride), w, h);
        } else {
            hf = high_frequency_map(image, block, stride);
        }
        for (std::size_t i = 0; i < hf.size(); ++i)
            bm.raw.data()[i] =
                std::max(bm.raw.data()[i], hf.data()[i] / mean_abs);
    }
    for (double &v : bm.raw.data())
        if (v < kRawZero)
            v = 0.0;

    bm.sharpness = ScalarField(w, h, 0.0);
    auto [mn, mx] = std::minmax_element(bm.raw.data().begin(), bm.raw.data().end());
    double const lo = *mn;
    double const hi = *mx;
    if (hi <= 0.0)
        return bm;
    if (hi - lo <= 1e-9 * hi) {
        for (std::size_t i = 0; i < bm.raw.size(); ++i)
            bm.sharpness.data()[i] = bm.raw.data()[i] > 0.0 ? 1.0 : 0.0;
        return bm;
    }
    for (std::size_t i = 0; i < bm.raw.size(); ++i)
        bm.sharpness.data()[i] = (bm.raw.data()[i] - lo) / (hi - lo);
    return bm;
}

double mean_sharpness_score(BlurMap const &bm) {
    if (bm.raw.empty())
        return 0.0;
    double s = 0.0;
    for (double v : bm.raw.data())
        s += v;
    return s / static_cast<double>(bm.raw.size());
}

double otsu_threshold_nonzero(ScalarField const &values) {
    constexpr int kBins = 256;
    std::array<double, kBins> hist{};
    double n = 0.0;
    for (double v : values.data()) {
        if (v <= 0.0)
            continue;
        int const b = std::min(kBins - 1, static_cast<int>(v * kBins));
        hist[b] += 1.0;
        n += 1.0;
    }
    if (n == 0.0)
        return 2.0;
    int occupied = 0;
    for (double c : hist)
        occupied += c > 0.0 ? 1 : 0;
    if (occupied <= 1)
        return std::numeric_limits<double>::min();

    double total_mean = 0.0;
    for (int b = 0; b < kBins; ++b)
        total_mean += b * hist[b];
    total_mean /= n;

    double w0 = 0.0;
    double sum0 = 0.0;
    double best = -1.0;
    int best_bin = 0;
    for (int b = 0; b < kBins - 1; ++b) {
        w0 += hist[b] / n;
        sum0 += b * hist[b] / n;
        double const w1 = 1.0 - w0;
        if (w0 <= 0.0 || w1 <= 0.0)
            continue;
        double const m0 = sum0 / w0;
        double const m1 = (total_mean - sum0) / w1;
        double const between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_bin = b;
        }
    }
    return static_cast<double>(best_bin + 1) / kBins;
}

BinaryMask sharp_region_mask(BlurMap const &bm, int dilation_radius) {
    if (dilation_radius < 0)
        throw InvalidArgument("dilation radius must be >= 0");
    auto const &s = bm.sharpness;
    double const t = otsu_threshold_nonzero(s);
    BinaryMask m(s.width(), s.height());
    for (std::size_t i = 0; i < s.size(); ++i)
        m.data()[i] = s.data()[i] >= t ? 1 : 0;
    return dilate_disc(m, dilation_radius);
}

} // namespace evseg
