// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace evseg {

namespace {

constexpr double kUs = 1e6;
constexpr int kBisections = 24;
constexpr double kMaxStepDisplacement = 0.5;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct Level {
    int value = 0;
    int owner = 0; ///< 0 background, k = objects[k-1]
};

/// Inverse of p = c + v t + s R(phi t)(q - c) for a point p at time t,
/// returning q - c.
Point2 to_body(MotionParams const &m, Point2 c, Point2 p, double t) {
    double const dx = p.x - c.x - m.vx * t;
    double const dy = p.y - c.y - m.vy * t;
    double const s = 1.0 + m.hz * t;
    double const th = m.phi * t;
    if (th == 0.0)
        return {dx / s, dy / s};
    double const co = std::cos(th);
    double const sn = std::sin(th);
    return {(co * dx + sn * dy) / s, (-sn * dx + co * dy) / s};
}

class SceneModel {
  public:
    SceneModel(SceneSpec const &spec, std::uint64_t seed)
        : spec_(spec), center_(sensor_center(spec.width, spec.height)),
          texture_key_(splitmix(seed ^ 0x5EEDBA5EULL)) {}

    [[nodiscard]] bool inside(SceneObject const &o, Point2 q) const {
        if (o.shape == ShapeKind::disc) {
            double const r = 0.5 * o.width;
            return q.x * q.x + q.y * q.y < r * r;
        }
        return q.x >= -0.5 * o.width && q.x < 0.5 * o.width &&
               q.y >= -0.5 * o.height && q.y < 0.5 * o.height;
    }

    [[nodiscard]] Level level(int x, int y, double t) const {
        Point2 const p{static_cast<double>(x), static_cast<double>(y)};
        for (std::size_t k = spec_.objects.size(); k-- > 0;) {
            auto const &o = spec_.objects[k];
            Point2 const q = to_body(o.motion, o.position, p, t);
            if (!inside(o, q))
                continue;
            int tex = 0;
            if (o.texture_cell > 0.0) {
                auto const cx = static_cast<long long>(
                    std::floor((q.x + 0.5 * o.width) / o.texture_cell));
                auto const cy = static_cast<long long>(
                    std::floor((q.y + 0.5 * o.height) / o.texture_cell));
                tex = static_cast<int>((cx + cy) & 1);
            }
            return {(o.contrast > 0 ? 1 : -1) * (3 + tex),
                    static_cast<int>(k) + 1};
        }
        if (spec_.background_cell <= 0.0)
            return {0, 0};
        Point2 const w = to_body(spec_.ego, center_, p, t);
        auto const cx = static_cast<long long>(
            std::floor((w.x + center_.x) / spec_.background_cell));
        auto const cy = static_cast<long long>(
            std::floor((w.y + center_.y) / spec_.background_cell));
        auto const h = splitmix(texture_key_ ^
                                splitmix(static_cast<std::uint64_t>(cx) * 73856093ULL ^
                                         static_cast<std::uint64_t>(cy) * 19349663ULL));
        return {static_cast<int>(h & 1), 0};
    }

    [[nodiscard]] Point2 object_center(std::size_t k, double t) const {
        auto const &o = spec_.objects[k];
        return {o.position.x + o.motion.vx * t, o.position.y + o.motion.vy * t};
    }

    /// Pixel-space radius bounding object k at time t.
    [[nodiscard]] double object_radius(std::size_t k, double t) const {
        auto const &o = spec_.objects[k];
        double const s = 1.0 + o.motion.hz * t;
        double const r = o.shape == ShapeKind::disc
                             ? 0.5 * o.width
                             : 0.5 * std::hypot(o.width, o.height);
        return s * r;
    }

    [[nodiscard]] bool background_moves() const {
        return spec_.background_cell > 0.0 &&
               !(spec_.ego == MotionParams{});
    }

    /// Upper bound of any scene point's speed in px/s.
    [[nodiscard]] double max_speed() const {
        double best = 0.0;
        double const T = spec_.duration;
        auto bound = [&](MotionParams const &m, double r) {
            double const smax = std::max(1.0, 1.0 + m.hz * T);
            return std::hypot(m.vx, m.vy) + std::abs(m.hz) * r +
                   smax * std::abs(m.phi) * r;
        };
        for (std::size_t k = 0; k < spec_.objects.size(); ++k) {
            double const r = std::max(object_radius(k, 0.0),
                                      object_radius(k, T));
            best = std::max(best, bound(spec_.objects[k].motion, r));
        }
        if (background_moves()) {
            double const r = std::hypot(spec_.width, spec_.height);
            best = std::max(best, bound(spec_.ego, r));
        }
        return best;
    }

    [[nodiscard]] SceneSpec const &spec() const { return spec_; }
    [[nodiscard]] Point2 center() const { return center_; }

  private:
    SceneSpec const &spec_;
    Point2 center_;
    std::uint64_t texture_key_;
};

struct RawEvent {
    Event e;
    std::uint16_t label = 0;
};

} // namespace

void SceneSpec::validate() const {
    if (width <= 0 || height <= 0)
        throw InvalidArgument("scene dimensions must be positive");
    if (width > 65535 || height > 65535)
        throw InvalidArgument("scene dimensions exceed 16-bit coordinates");
    if (!(duration > 0.0) || !std::isfinite(duration))
        throw InvalidArgument("scene duration must be positive");
    if (!(frame_interval > 0.0))
        throw InvalidArgument("frame interval must be positive");
    if (!(noise_rate >= 0.0))
        throw InvalidArgument("noise rate must be non-negative");
    if (!(background_cell >= 0.0))
        throw InvalidArgument("background cell must be non-negative");
    if (1.0 + ego.hz * duration <= 0.05)
        throw InvalidArgument("ego zoom collapses the scene");
    if (objects.size() >= 65535)
        throw InvalidArgument("too many objects");
    for (auto const &o : objects) {
        if (!(o.width > 0.0) ||
            (o.shape != ShapeKind::disc && !(o.height > 0.0)))
            throw InvalidArgument("object size must be positive");
        if (o.contrast == 0)
            throw InvalidArgument("object contrast sign must be nonzero");
        if (!(o.texture_cell >= 0.0))
            throw InvalidArgument("texture cell must be non-negative");
        if (1.0 + o.motion.hz * duration <= 0.05)
            throw InvalidArgument("object zoom collapses the object");
    }
}

std::vector<BinaryMask> object_supports(SceneSpec const &spec, double t) {
    SceneModel const model(spec, 0);
    std::vector<BinaryMask> out(spec.objects.size(),
                                BinaryMask(spec.width, spec.height));
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            auto const lv = model.level(x, y, t);
            if (lv.owner > 0)
                out[lv.owner - 1](x, y) = 1;
        }
    return out;
}

SceneResult generate_scene(SceneSpec const &spec, std::uint64_t seed) {
    spec.validate();
    SceneModel const model(spec, seed);
    int const W = spec.width;
    int const H = spec.height;
    auto const duration_us = static_cast<Timestamp>(std::llround(spec.duration * kUs));
    Timestamp const last_us = duration_us > 0 ? duration_us - 1 : 0;

    std::vector<RawEvent> raw;
    Grid<int> value(W, H);
    Grid<int> owner(W, H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            auto const lv = model.level(x, y, 0.0);
            value(x, y) = lv.value;
            owner(x, y) = lv.owner;
        }

    double const speed = model.max_speed();
    if (speed > 0.0) {
        auto const steps = static_cast<long long>(
            std::ceil(spec.duration * speed / kMaxStepDisplacement));
        double const dt = spec.duration / static_cast<double>(steps);
        Grid<long long> visited(W, H, -1);
        bool const full = model.background_moves();
        for (long long s = 0; s < steps; ++s) {
            double const t0 = s * dt;
            double const t1 = (s + 1 == steps) ? spec.duration : (s + 1) * dt;
            auto visit = [&](int x, int y) {
                if (visited(x, y) == s)
                    return;
                visited(x, y) = s;
                auto const now = model.level(x, y, t1);
                int const before = value(x, y);
                int const before_owner = owner(x, y);
                if (now.value != before) {
                    double lo = t0;
                    double hi = t1;
                    for (int i = 0; i < kBisections; ++i) {
                        double const mid = 0.5 * (lo + hi);
                        if (model.level(x, y, mid).value == before)
                            lo = mid;
                        else
                            hi = mid;
                    }
                    auto t_us = static_cast<Timestamp>(std::llround(hi * kUs));
                    t_us = std::min(t_us, last_us);
                    int const label = now.owner > 0 ? now.owner : before_owner;
                    raw.push_back(
                        {{t_us, static_cast<std::uint16_t>(x),
                          static_cast<std::uint16_t>(y),
                          static_cast<std::int8_t>(now.value > before ? 1 : -1)},
                         static_cast<std::uint16_t>(label)});
                }
                value(x, y) = now.value;
                owner(x, y) = now.owner;
            };
            if (full) {
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        visit(x, y);
                continue;
            }
            for (std::size_t k = 0; k < spec.objects.size(); ++k) {
                if (spec.objects[k].motion == MotionParams{})
                    continue;
                double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
                for (double t : {t0, t1}) {
                    auto const c = model.object_center(k, t);
                    double const r = model.object_radius(k, t) + 2.0;
                    x0 = std::min(x0, c.x - r);
                    y0 = std::min(y0, c.y - r);
                    x1 = std::max(x1, c.x + r);
                    y1 = std::max(y1, c.y + r);
                }
                int const ix0 = std::max(0, static_cast<int>(std::floor(x0)));
                int const iy0 = std::max(0, static_cast<int>(std::floor(y0)));
                int const ix1 = std::min(W - 1, static_cast<int>(std::ceil(x1)));
                int const iy1 = std::min(H - 1, static_cast<int>(std::ceil(y1)));
                for (int y = iy0; y <= iy1; ++y)
                    for (int x = ix0; x <= ix1; ++x)
                        visit(x, y);
            }
        }
    }

    std::mt19937_64 rng(seed);
    if (spec.noise_rate > 0.0) {
        std::poisson_distribution<long long> count_dist(
            spec.noise_rate * W * H * spec.duration);
        long long const n = count_dist(rng);
        std::uniform_int_distribution<int> xd(0, W - 1);
        std::uniform_int_distribution<int> yd(0, H - 1);
        std::uniform_int_distribution<Timestamp> td(0, last_us);
        std::bernoulli_distribution pd(0.5);
        for (long long i = 0; i < n; ++i) {
            Event e;
            e.t = td(rng);
            e.x = static_cast<std::uint16_t>(xd(rng));
            e.y = static_cast<std::uint16_t>(yd(rng));
            e.polarity = pd(rng) ? 1 : -1;
            raw.push_back({e, 0});
        }
    }

    std::stable_sort(raw.begin(), raw.end(), [](auto const &a, auto const &b) {
        if (a.e.t != b.e.t)
            return a.e.t < b.e.t;
        if (a.e.y != b.e.y)
            return a.e.y < b.e.y;
        return a.e.x < b.e.x;
    });

    SceneResult out;
    out.stream.width = W;
    out.stream.height = H;
    out.stream.events.reserve(raw.size());
    out.labels.reserve(raw.size());
    for (auto const &r : raw) {
        out.stream.events.push_back(r.e);
        out.labels.push_back(r.label);
    }
    out.ego = spec.ego;
    for (auto const &o : spec.objects)
        out.object_motions.push_back(o.motion);

    auto const frames = static_cast<std::size_t>(
        std::ceil(spec.duration / spec.frame_interval - 1e-9));
    for (std::size_t k = 0; k < frames; ++k) {
        double const t =
            std::min(static_cast<double>(k + 1) * spec.frame_interval,
                     spec.duration);
        out.frame_times.push_back(
            static_cast<Timestamp>(std::llround(t * kUs)));
        BinaryMask all(W, H);
        std::vector<BinaryMask> per(spec.objects.size(), BinaryMask(W, H));
        FlowField flow(W, H);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                auto const lv = model.level(x, y, t);
                Point2 const p{static_cast<double>(x), static_cast<double>(y)};
                Point2 d;
                if (lv.owner > 0) {
                    auto const k_obj = static_cast<std::size_t>(lv.owner - 1);
                    all(x, y) = 1;
                    per[k_obj](x, y) = 1;
                    d = motion_displacement(spec.objects[k_obj].motion, p,
                                            model.object_center(k_obj, t),
                                            spec.frame_interval);
                } else {
                    d = motion_displacement(spec.ego, p, model.center(),
                                            spec.frame_interval);
                }
                flow.u(x, y) = static_cast<float>(d.x);
                flow.v(x, y) = static_cast<float>(d.y);
            }
        out.masks.push_back(std::move(all));
        out.object_masks.push_back(std::move(per));
        out.flows.push_back(std::move(flow));
    }
    return out;
}

RgbImage render_scene(SceneSpec const &spec, std::uint64_t seed, double t) {
    spec.validate();
    SceneModel const model(spec, seed);
    RgbImage img(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            int const v = model.level(x, y, t).value;
            auto const g = static_cast<std::uint8_t>(std::clamp(128 + 30 * v, 0, 255));
            img(x, y) = {g, g, g};
        }
    return img;
}

LabeledEventFile ground_truth_labeled(SceneResult const &scene) {
    LabeledEventFile f;
    f.width = scene.stream.width;
    f.height = scene.stream.height;
    f.motions[0] = scene.ego;
    for (std::size_t k = 0; k < scene.object_motions.size(); ++k)
        f.motions[static_cast<std::uint16_t>(k + 1)] = scene.object_motions[k];
    f.events.reserve(scene.stream.events.size());
    for (std::size_t i = 0; i < scene.stream.events.size(); ++i) {
        auto const label = scene.labels[i];
        f.events.push_back({scene.stream.events[i], f.motions.at(label), label});
    }
    return f;
}

namespace {

using nlohmann::json;

MotionParams motion_from_json(json const &j) {
    MotionParams m;
    if (j.is_null())
        return m;
    m.vx = j.value("vx", 0.0);
    m.vy = j.value("vy", 0.0);
    m.hz = j.value("hz", 0.0);
    m.phi = j.value("phi", 0.0);
    return m;
}

json motion_to_json(MotionParams const &m) {
    return {{"vx", m.vx}, {"vy", m.vy}, {"hz", m.hz}, {"phi", m.phi}};
}

ShapeKind shape_from_string(std::string const &s) {
    if (s == "rectangle")
        return ShapeKind::rectangle;
    if (s == "disc")
        return ShapeKind::disc;
    if (s == "bar")
        return ShapeKind::bar;
    throw InvalidArgument("unknown shape '" + s + "'");
}

char const *shape_name(ShapeKind k) {
    switch (k) {
    case ShapeKind::disc:
        return "disc";
    case ShapeKind::bar:
        return "bar";
    default:
        return "rectangle";
    }
}

} // namespace

SceneSpec scene_spec_from_json(std::string const &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (json::exception const &e) {
        throw FormatError(std::string("scene JSON: ") + e.what());
    }
    try {
        SceneSpec s;
        s.width = j.value("width", s.width);
        s.height = j.value("height", s.height);
        s.duration = j.value("duration", s.duration);
        s.frame_interval = j.value("frame_interval", s.frame_interval);
        s.noise_rate = j.value("noise_rate", s.noise_rate);
        s.background_cell = j.value("background_cell", s.background_cell);
        if (j.contains("ego"))
            s.ego = motion_from_json(j["ego"]);
        for (auto const &o : j.value("objects", json::array())) {
            SceneObject obj;
            obj.shape = shape_from_string(o.value("shape", "rectangle"));
            auto const size = o.at("size");
            if (size.is_number()) {
                obj.width = obj.height = size.get<double>();
            } else {
                obj.width = size.at(0).get<double>();
                obj.height = size.size() > 1 ? size.at(1).get<double>()
                                             : obj.width;
            }
            auto const pos = o.at("position");
            obj.position = {pos.at(0).get<double>(), pos.at(1).get<double>()};
            if (o.contains("motion"))
                obj.motion = motion_from_json(o["motion"]);
            obj.contrast = o.value("contrast", 1);
            obj.texture_cell = o.value("texture_cell", 0.0);
            s.objects.push_back(obj);
        }
        s.validate();
        return s;
    } catch (json::exception const &e) {
        throw FormatError(std::string("scene JSON: ") + e.what());
    }
}

std::uint64_t scene_seed_from_json(std::string const &text,
                                   std::uint64_t fallback) {
    auto const j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.contains("seed"))
        return fallback;
    return j["seed"].get<std::uint64_t>();
}

std::string scene_spec_to_json(SceneSpec const &spec, std::uint64_t seed) {
    json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["duration"] = spec.duration;
    j["frame_interval"] = spec.frame_interval;
    j["noise_rate"] = spec.noise_rate;
    j["background_cell"] = spec.background_cell;
    j["ego"] = motion_to_json(spec.ego);
    j["seed"] = seed;
    j["objects"] = json::array();
    for (auto const &o : spec.objects) {
        j["objects"].push_back({{"shape", shape_name(o.shape)},
                                {"size", {o.width, o.height}},
                                {"position", {o.position.x, o.position.y}},
                                {"motion", motion_to_json(o.motion)},
                                {"contrast", o.contrast},
                                {"texture_cell", o.texture_cell}});
    }
    return j.dump(2);
}

namespace {

std::string indexed(char const *pattern, std::size_t a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, a);
    return buf;
}

} // namespace

void write_scene(std::string const &out_dir, SceneSpec const &spec,
                 SceneResult const &scene, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::path const root(out_dir);
    std::error_code ec;
    for (auto const *sub : {"", "masks", "flow", "gt"}) {
        fs::create_directories(root / sub, ec);
        if (ec)
            throw IoError("cannot create " + (root / sub).string());
    }
    write_events_evs((root / "events.evs").string(), scene.stream);
    write_labeled_events((root / "gt_labels.evl").string(),
                         ground_truth_labeled(scene));
    for (std::size_t k = 0; k < scene.masks.size(); ++k) {
        write_pgm_mask((root / "masks" / indexed("mask_%06zu.pgm", k)).string(),
                       scene.masks[k]);
        save_flow((root / "flow" / indexed("flow_%06zu.flw", k)).string(),
                  scene.flows[k]);
    }

    auto const interval_us = static_cast<Timestamp>(
        std::llround(spec.frame_interval * kUs));
    std::map<std::pair<std::size_t, std::uint16_t>, BinaryMask> gt;
    for (std::size_t i = 0; i < scene.stream.events.size(); ++i) {
        auto const label = scene.labels[i];
        if (label == 0)
            continue;
        auto const &e = scene.stream.events[i];
        auto const key = std::make_pair(
            static_cast<std::size_t>(e.t / interval_us), label);
        auto it = gt.find(key);
        if (it == gt.end())
            it = gt.emplace(key, BinaryMask(spec.width, spec.height)).first;
        it->second(e.x, e.y) = 1;
    }
    for (auto const &[key, mask] : gt) {
        char name[64];
        std::snprintf(name, sizeof name, "window_%06zu_obj_%u.pgm", key.first,
                      static_cast<unsigned>(key.second));
        write_pgm_mask((root / "gt" / name).string(), mask);
    }

    json manifest = json::parse(scene_spec_to_json(spec, seed));
    manifest["event_count"] = scene.stream.events.size();
    manifest["frames"] = scene.masks.size();
    std::ofstream os(root / "scene.json");
    if (!os)
        throw IoError("cannot write scene.json");
    os << manifest.dump(2) << '\n';
}

} // namespace evseg
