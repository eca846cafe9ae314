// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad size, out-of-range knob).
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

/// Event stream is not sorted by timestamp.
class UnsortedStreamError : public Error {
  public:
    UnsortedStreamError(std::size_t index, std::string const &what)
        : Error(what), index_(index) {}

    /// Index of the first event whose timestamp is smaller than its
    /// predecessor's.
    [[nodiscard]] std::size_t index() const noexcept { return index_; }

  private:
    std::size_t index_;
};

/// File does not start with the expected magic bytes.
class FormatError : public Error {
  public:
    using Error::Error;
};

/// Header dimensions overflow or are inconsistent.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// Payload shorter than what the header promises.
class TruncatedError : public Error {
  public:
    TruncatedError(std::size_t expected, std::size_t actual,
                   std::string const &what)
        : Error(what), expected_(expected), actual_(actual) {}

    [[nodiscard]] std::size_t expected_bytes() const noexcept {
        return expected_;
    }
    [[nodiscard]] std::size_t actual_bytes() const noexcept { return actual_; }

  private:
    std::size_t expected_;
    std::size_t actual_;
};

class IoError : public Error {
  public:
    using Error::Error;
};

/// Iterative eigen-solver did not reach the requested residual.
class ConvergenceError : public Error {
  public:
    ConvergenceError(int iterations, std::string const &what)
        : Error(what), iterations_(iterations) {}

    [[nodiscard]] int iterations() const noexcept { return iterations_; }

  private:
    int iterations_;
};

/// Similarity graph has no preferred bipartition (all weights equal).
class DegenerateGraphError : public Error {
  public:
    using Error::Error;
};

class EmptyWindowError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

} // namespace evseg
