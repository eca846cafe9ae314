// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/event_io.hpp
/// @brief Event file formats.
///
/// EVS1 (raw events): a 16-byte header `"EVS1" u16 W u16 H u64 reserved`
/// followed by 16-byte little-endian records
/// `u64 t, u16 x, u16 y, u8 p, 3 pad bytes` with p in {0, 1}.
///
/// EVL1 (labeled events): the same EVS1 header, with `reserved` holding the
/// record count, then 24-byte records
/// `u64 t, u16 x, u16 y, u8 p, u8 pad, u16 label, f32 v_x, f32 v_y`
/// and a trailing motion table: `u32 n` followed by n 20-byte entries
/// `u16 label, u16 pad, f32 v_x, f32 v_y, f32 h_z, f32 phi`.
///
/// CSV: one `t,x,y,p` line per event, optional header line.

#pragma once

#include "evseg/event.hpp"
#include "evseg/motion.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace evseg {

inline constexpr std::size_t kEvsHeaderBytes = 16;
inline constexpr std::size_t kEvsRecordBytes = 16;
inline constexpr std::size_t kLabeledRecordBytes = 24;
inline constexpr std::size_t kMotionTableEntryBytes = 20;

[[nodiscard]] EventStream read_events_csv(std::string const &path, int width,
                                          int height);
void write_events_csv(std::string const &path, EventStream const &stream);

[[nodiscard]] EventStream read_events_evs(std::string const &path);
void write_events_evs(std::string const &path, EventStream const &stream);

/// Dispatch on extension: `.csv` needs explicit sensor dims, anything else is
/// read as EVS1.
[[nodiscard]] EventStream read_events(std::string const &path, int csv_width,
                                      int csv_height);

/// Event with its continuous motion label and discrete object label
/// (0 = background).
struct LabeledEvent {
    Event event;
    MotionParams motion;
    std::uint16_t label = 0;

    friend bool operator==(LabeledEvent const &,
                           LabeledEvent const &) = default;
};

struct LabeledEventFile {
    int width = 0;
    int height = 0;
    std::vector<LabeledEvent> events;
    std::map<std::uint16_t, MotionParams> motions;
};

[[nodiscard]] std::vector<std::uint8_t>
encode_labeled_events(LabeledEventFile const &file);
[[nodiscard]] LabeledEventFile
decode_labeled_events(std::vector<std::uint8_t> const &bytes);

void write_labeled_events(std::string const &path,
                          LabeledEventFile const &file);
[[nodiscard]] LabeledEventFile read_labeled_events(std::string const &path);

[[nodiscard]] std::vector<std::uint8_t> read_file_bytes(std::string const &path);
void write_file_bytes(std::string const &path,
                      std::vector<std::uint8_t> const &bytes);

} // namespace evseg
