#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

namespace symkit {

// Axis-aligned box in pixels, top-left origin. Zero-area placeholders are
// legal values (w = h = 0).
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const BBox&) const = default;
};

inline double box_area(const BBox& b) { return b.w * b.h; }

inline std::pair<double, double> box_center(const BBox& b) {
    return {b.x + b.w / 2.0, b.y + b.h / 2.0};
}

inline BBox box_from_center(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, w, h};
}

inline double intersection_area(const BBox& a, const BBox& b) {
    const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
    const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    return ix * iy;
}

// Intersection over union; 0 when the union has no area.
inline double iou(const BBox& a, const BBox& b) {
    const double inter = intersection_area(a, b);
    const double uni = box_area(a) + box_area(b) - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

}  // namespace symkit
