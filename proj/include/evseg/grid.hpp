// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evseg/error.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace evseg {

/// Dense row-major 2-D field of `T`, indexed (x, y) with x the column.
template <typename T> class Grid {
  public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(checked_size(width, height), fill) {}

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    T &operator()(int x, int y) {
        return data_[static_cast<std::size_t>(y) * width_ + x];
    }
    T const &operator()(int x, int y) const {
        return data_[static_cast<std::size_t>(y) * width_ + x];
    }

    [[nodiscard]] bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    [[nodiscard]] std::vector<T> &data() noexcept { return data_; }
    [[nodiscard]] std::vector<T> const &data() const noexcept { return data_; }

    [[nodiscard]] bool same_shape(Grid const &o) const noexcept {
        return width_ == o.width_ && height_ == o.height_;
    }

    friend bool operator==(Grid const &, Grid const &) = default;

  private:
    static std::size_t checked_size(int width, int height) {
        if (width < 0 || height < 0)
            throw InvalidArgument("grid dimensions must be non-negative");
        return static_cast<std::size_t>(width) *
               static_cast<std::size_t>(height);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using ScalarField = Grid<double>;

/// Binary pixel mask; entries are 0 or 1.
using BinaryMask = Grid<std::uint8_t>;

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(Rgb, Rgb) = default;
};

using RgbImage = Grid<Rgb>;

[[nodiscard]] std::size_t count_set(BinaryMask const &m);

/// Elementwise OR of two masks of equal shape.
[[nodiscard]] BinaryMask mask_union(BinaryMask const &a, BinaryMask const &b);

/// Dilate with a Euclidean disc of the given radius (pixels within distance
/// <= radius of a set pixel become set).
[[nodiscard]] BinaryMask dilate_disc(BinaryMask const &m, int radius);

/// Separable Gaussian blur with reflect-101 borders. sigma <= 0 is identity.
[[nodiscard]] ScalarField gaussian_blur(ScalarField const &f, double sigma);

// Netpbm helpers. PGM masks are written 0/255 and read back as 0/1.
void write_pgm_mask(std::string const &path, BinaryMask const &m);
void write_pgm_gray(std::string const &path, Grid<std::uint8_t> const &gray);
[[nodiscard]] BinaryMask read_pgm_mask(std::string const &path);

/// 8-bit grayscale PNG of a scalar field, min-max scaled.
void write_png_scaled(std::string const &path, ScalarField const &f);

} // namespace evseg
