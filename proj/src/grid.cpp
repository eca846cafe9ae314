// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/grid.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace evseg {

std::size_t count_set(BinaryMask const &m) {
    return static_cast<std::size_t>(
        std::count_if(m.data().begin(), m.data().end(),
                      [](std::uint8_t v) { return v != 0; }));
}

BinaryMask mask_union(BinaryMask const &a, BinaryMask const &b) {
    if (!a.same_shape(b))
        throw InvalidArgument("mask_union: shape mismatch");
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = (a.data()[i] || b.data()[i]) ? 1 : 0;
    return out;
}

BinaryMask dilate_disc(BinaryMask const &m, int radius) {
    if (radius < 0)
        throw InvalidArgument("dilation radius must be >= 0");
    if (radius == 0)
        return m;
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius)
                offsets.emplace_back(dx, dy);
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m(x, y))
                continue;
            for (auto [dx, dy] : offsets) {
                int const nx = x + dx;
                int const ny = y + dy;
                if (out.contains(nx, ny))
                    out(nx, ny) = 1;
            }
        }
    }
    return out;
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

} // namespace

ScalarField gaussian_blur(ScalarField const &f, double sigma) {
    if (sigma <= 0.0 || f.empty())
        return f;
    int const radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        total += kernel[k + radius];
    }
    for (auto &k : kernel)
        k /= total;

    int const w = f.width();
    int const h = f.height();
    ScalarField tmp(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * f(reflect101(x + k, w), y);
            tmp(x, y) = acc;
        }
    ScalarField out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp(x, reflect101(y + k, h));
            out(x, y) = acc;
        }
    return out;
}

void write_pgm_gray(std::string const &path, Grid<std::uint8_t> const &gray) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot open " + path + " for writing");
    os << "P5\n" << gray.width() << ' ' << gray.height() << "\n255\n";
    os.write(reinterpret_cast<char const *>(gray.data().data()),
             static_cast<std::streamsize>(gray.size()));
    if (!os)
        throw IoError("short write to " + path);
}

void write_pgm_mask(std::string const &path, BinaryMask const &m) {
    Grid<std::uint8_t> gray(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i)
        gray.data()[i] = m.data()[i] ? 255 : 0;
    write_pgm_gray(path, gray);
}

BinaryMask read_pgm_mask(std::string const &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open " + path);
    auto next_token = [&is]() {
        std::string tok;
        while (is >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
        throw FormatError("truncated PGM header");
    };
    if (next_token() != "P5")
        throw FormatError(path + ": not a binary PGM");
    int const w = std::stoi(next_token());
    int const h = std::stoi(next_token());
    int const maxval = std::stoi(next_token());
    if (maxval != 255)
        throw FormatError(path + ": only 8-bit PGM supported");
    is.get();
    BinaryMask m(w, h);
    std::vector<char> buf(m.size());
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size())
        throw TruncatedError(buf.size(), static_cast<std::size_t>(is.gcount()),
                             path + ": truncated PGM payload");
    for (std::size_t i = 0; i < buf.size(); ++i)
        m.data()[i] = buf[i] != 0 ? 1 : 0;
    return m;
}

void write_png_scaled(std::string const &path, ScalarField const &f) {
    std::unique_ptr<std::FILE, int (*)(std::FILE *)> fp(
        std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp)
        throw IoError("cannot open " + path + " for writing");

    double lo = 0.0;
    double hi = 0.0;
    if (!f.empty()) {
        auto [mn, mx] = std::minmax_element(f.data().begin(), f.data().end());
        lo = *mn;
        hi = *mx;
    }
    double const span = hi > lo ? hi - lo : 1.0;

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(f.width()),
                 static_cast<png_uint_32>(f.height()), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(f.width()));
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x)
            row[x] = static_cast<png_byte>(
                std::lround(255.0 * (f(x, y) - lo) / span));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace evseg
