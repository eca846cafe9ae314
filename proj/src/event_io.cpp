// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/event_io.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace evseg {

std::vector<std::uint8_t> read_file_bytes(std::string const &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file_bytes(std::string const &path,
                      std::vector<std::uint8_t> const &bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot open " + path + " for writing");
    os.write(reinterpret_cast<char const *>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os)
        throw IoError("short write to " + path);
}

namespace {

std::int8_t polarity_from_bit(unsigned p, std::size_t index) {
    if (p > 1)
        throw FormatError("event " + std::to_string(index) +
                          ": polarity must be 0 or 1");
    return p == 1 ? 1 : -1;
}

std::uint8_t polarity_to_bit(std::int8_t p) { return p > 0 ? 1 : 0; }

template <typename T> T parse_field(std::string_view s, std::size_t line) {
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw FormatError("CSV line " + std::to_string(line) +
                          ": cannot parse field '" + std::string(s) + "'");
    return v;
}

void write_evs_header(detail::ByteWriter &w, int width, int height,
                      std::uint64_t reserved) {
    if (width <= 0 || height <= 0 || width > 0xFFFF || height > 0xFFFF)
        throw DimensionError("sensor dimensions do not fit in u16");
    w.magic("EVS1");
    w.u16(static_cast<std::uint16_t>(width));
    w.u16(static_cast<std::uint16_t>(height));
    w.u64(reserved);
}

} // namespace

EventStream read_events_csv(std::string const &path, int width, int height) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open " + path);
    EventStream s{width, height, {}};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (lineno == 1 && !std::isdigit(static_cast<unsigned char>(line[0])))
            continue; // header
        std::string_view sv(line);
        std::string_view fields[4];
        for (int f = 0; f < 4; ++f) {
            auto const comma = sv.find(',');
            if (f < 3 && comma == std::string_view::npos)
                throw FormatError("CSV line " + std::to_string(lineno) +
                                  ": expected 4 fields t,x,y,p");
            fields[f] = sv.substr(0, comma);
            sv = comma == std::string_view::npos ? std::string_view{}
                                                  : sv.substr(comma + 1);
        }
        Event e;
        e.t = parse_field<std::uint64_t>(fields[0], lineno);
        e.x = parse_field<std::uint16_t>(fields[1], lineno);
        e.y = parse_field<std::uint16_t>(fields[2], lineno);
        e.polarity =
            polarity_from_bit(parse_field<unsigned>(fields[3], lineno),
                              s.events.size());
        s.events.push_back(e);
    }
    require_sorted(s.events);
    require_in_bounds(s.events, width, height);
    return s;
}

void write_events_csv(std::string const &path, EventStream const &stream) {
    std::ofstream os(path);
    if (!os)
        throw IoError("cannot open " + path + " for writing");
    os << "t,x,y,p\n";
    for (auto const &e : stream.events)
        os << e.t << ',' << e.x << ',' << e.y << ','
           << int(polarity_to_bit(e.polarity)) << '\n';
}

EventStream read_events_evs(std::string const &path) {
    auto const bytes = read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.expect_magic("EVS1");
    EventStream s;
    s.width = r.u16();
    s.height = r.u16();
    r.u64();
    if (r.remaining() % kEvsRecordBytes != 0)
        throw TruncatedError(
            r.position() + (r.remaining() / kEvsRecordBytes + 1) * kEvsRecordBytes,
            bytes.size(), path + ": trailing partial record");
    std::size_t const n = r.remaining() / kEvsRecordBytes;
    s.events.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Event e;
        e.t = r.u64();
        e.x = r.u16();
        e.y = r.u16();
        e.polarity = polarity_from_bit(r.u8(), i);
        r.skip(3);
        s.events.push_back(e);
    }
    require_sorted(s.events);
    require_in_bounds(s.events, s.width, s.height);
    return s;
}

void write_events_evs(std::string const &path, EventStream const &stream) {
    detail::ByteWriter w;
    write_evs_header(w, stream.width, stream.height, 0);
    for (auto const &e : stream.events) {
        w.u64(e.t);
        w.u16(e.x);
        w.u16(e.y);
        w.u8(polarity_to_bit(e.polarity));
        w.pad(3);
    }
    write_file_bytes(path, w.take());
}

EventStream read_events(std::string const &path, int csv_width,
                        int csv_height) {
    auto const dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".csv") {
        if (csv_width <= 0 || csv_height <= 0)
            throw ConfigError("CSV event input needs sensor width/height");
        return read_events_csv(path, csv_width, csv_height);
    }
    return read_events_evs(path);
}

std::vector<std::uint8_t> encode_labeled_events(LabeledEventFile const &file) {
    detail::ByteWriter w;
    write_evs_header(w, file.width, file.height, file.events.size());
    for (auto const &le : file.events) {
        w.u64(le.event.t);
        w.u16(le.event.x);
        w.u16(le.event.y);
        w.u8(polarity_to_bit(le.event.polarity));
        w.pad(1);
        w.u16(le.label);
        w.f32(static_cast<float>(le.motion.vx));
        w.f32(static_cast<float>(le.motion.vy));
    }
    w.u32(static_cast<std::uint32_t>(file.motions.size()));
    for (auto const &[label, m] : file.motions) {
        w.u16(label);
        w.pad(2);
        w.f32(static_cast<float>(m.vx));
        w.f32(static_cast<float>(m.vy));
        w.f32(static_cast<float>(m.hz));
        w.f32(static_cast<float>(m.phi));
    }
    return w.take();
}

LabeledEventFile decode_labeled_events(std::vector<std::uint8_t> const &bytes) {
    detail::ByteReader r(bytes, "labeled events");
    r.expect_magic("EVS1");
    LabeledEventFile f;
    f.width = r.u16();
    f.height = r.u16();
    std::uint64_t const n = r.u64();
    if (n > r.remaining() / kLabeledRecordBytes)
        throw TruncatedError(kEvsHeaderBytes + n * kLabeledRecordBytes,
                             bytes.size(),
                             "labeled events: truncated, header promises " +
                                 std::to_string(n) + " records");
    f.events.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        LabeledEvent le;
        le.event.t = r.u64();
        le.event.x = r.u16();
        le.event.y = r.u16();
        le.event.polarity = polarity_from_bit(r.u8(), i);
        r.skip(1);
        le.label = r.u16();
        le.motion.vx = r.f32();
        le.motion.vy = r.f32();
        f.events.push_back(le);
    }
    std::uint32_t const labels = r.u32();
    for (std::uint32_t i = 0; i < labels; ++i) {
        std::uint16_t const label = r.u16();
        r.skip(2);
        MotionParams m;
        m.vx = r.f32();
        m.vy = r.f32();
        m.hz = r.f32();
        m.phi = r.f32();
        f.motions[label] = m;
    }
    // Per-event motion carries only translation; restore the full 4-DoF
    // motion from the table.
    for (auto &le : f.events) {
        auto it = f.motions.find(le.label);
        if (it != f.motions.end()) {
            le.motion.hz = it->second.hz;
            le.motion.phi = it->second.phi;
        }
    }
    return f;
}

void write_labeled_events(std::string const &path,
                          LabeledEventFile const &file) {
    write_file_bytes(path, encode_labeled_events(file));
}

LabeledEventFile read_labeled_events(std::string const &path) {
    return decode_labeled_events(read_file_bytes(path));
}

} // namespace evseg
