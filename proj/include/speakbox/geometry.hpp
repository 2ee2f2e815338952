#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "speakbox/errors.hpp"

namespace speakbox {

// A mouse click with its timestamp (pixels, seconds).
struct Click {
    double x = 0;
    double y = 0;
    double t = 0;

    bool operator==(const Click&) const = default;
};

// Axis-aligned box, x0 <= x1 and y0 <= y1.
struct Box {
    double x0 = 0;
    double y0 = 0;
    double x1 = 0;
    double y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }

    bool operator==(const Box&) const = default;
};

// A location given by a single click; used by the class-labelling task.
struct Point {
    double x = 0;
    double y = 0;

    bool operator==(const Point&) const = default;
};

enum class EventKind { Point, Box };

inline const char* to_string(EventKind k) { return k == EventKind::Point ? "point" : "box"; }

// Build a box from the four extreme clicks (top-, bottom-, left-, right-most
// point of the object). Click order does not matter.
inline Box box_from_extreme_clicks(std::span<const Click> clicks) {
    if (clicks.size() != 4) {
        throw ValidationError("extreme-click box needs exactly 4 clicks, got " +
                              std::to_string(clicks.size()));
    }
    Box b{clicks[0].x, clicks[0].y, clicks[0].x, clicks[0].y};
    for (const Click& c : clicks.subspan(1)) {
        b.x0 = std::min(b.x0, c.x);
        b.y0 = std::min(b.y0, c.y);
        b.x1 = std::max(b.x1, c.x);
        b.y1 = std::max(b.y1, c.y);
    }
    return b;
}

// One annotated object location: a point click or an extreme-click box,
// together with the time interval spent annotating it.
struct ObjectEvent {
    EventKind kind = EventKind::Box;
    std::vector<Click> clicks;
    double start = 0;  // min click time
    double end = 0;    // max click time
    std::optional<Box> box;

    bool operator==(const ObjectEvent&) const = default;
};

inline ObjectEvent make_object_event(EventKind kind, std::vector<Click> clicks) {
    const size_t expected = kind == EventKind::Point ? 1 : 4;
    if (clicks.size() != expected) {
        throw ValidationError(std::string(to_string(kind)) + " event needs " +
                              std::to_string(expected) + " clicks, got " +
                              std::to_string(clicks.size()));
    }
    for (const Click& c : clicks) {
        if (!std::isfinite(c.x) || !std::isfinite(c.y) || !std::isfinite(c.t) || c.x < 0 ||
            c.y < 0) {
            throw ValidationError("click coordinates must be finite and non-negative");
        }
    }
    ObjectEvent ev;
    ev.kind = kind;
    ev.start = clicks[0].t;
    ev.end = clicks[0].t;
    for (const Click& c : clicks) {
        ev.start = std::min(ev.start, c.t);
        ev.end = std::max(ev.end, c.t);
    }
    if (kind == EventKind::Box) ev.box = box_from_extreme_clicks(clicks);
    ev.clicks = std::move(clicks);
    return ev;
}

// Intersection-over-union; 0 when the union has zero area.
inline double iou(const Box& a, const Box& b) {
    const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    const double inter = std::max(0.0, iw) * std::max(0.0, ih);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0) return 0.0;
    return inter / uni;
}

// Inclusive on the boundary.
inline bool point_in_box(double x, double y, const Box& b) {
    return b.x0 <= x && x <= b.x1 && b.y0 <= y && y <= b.y1;
}

inline bool point_in_box(const Click& c, const Box& b) { return point_in_box(c.x, c.y, b); }
inline bool point_in_box(const Point& p, const Box& b) { return point_in_box(p.x, p.y, b); }

// Final pipeline output: an object location with the class assigned to it.
// class_id is absent when the alignment left the object unmatched.
struct ObjectAnnotation {
    std::string image_id;
    std::optional<std::string> class_id;
    std::variant<Box, Point> location;

    bool is_box() const { return std::holds_alternative<Box>(location); }
    const Box& box() const { return std::get<Box>(location); }
    const Point& point() const { return std::get<Point>(location); }

    bool operator==(const ObjectAnnotation&) const = default;
};

}  // namespace speakbox
