#include "lgeseg/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace lgeseg {

double polygon_signed_area(const std::vector<Point2>& poly) {
    const size_t n = poly.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Point2& a = poly[i];
        const Point2& b = poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    return 0.5 * acc;
}

Point2 polygon_centroid(const std::vector<Point2>& poly) {
    const size_t n = poly.size();
    if (n < 3) throw std::invalid_argument("polygon_centroid: need at least 3 vertices");
    double area = polygon_signed_area(poly);
    if (std::abs(area) < 1e-12) throw std::invalid_argument("polygon_centroid: degenerate (zero-area) polygon");
    double cx = 0.0, cy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Point2& a = poly[i];
        const Point2& b = poly[(i + 1) % n];
        const double cross = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * cross;
        cy += (a.y + b.y) * cross;
    }
    return {cx / (6.0 * area), cy / (6.0 * area)};
}

bool point_in_polygon(const Point2& p, const std::vector<Point2>& poly) {
    const size_t n = poly.size();
    bool inside = false;
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = poly[i];
        const Point2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) &&
            p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
            inside = !inside;
        }
    }
    return inside;
}

namespace {

int orient(const Point2& a, const Point2& b, const Point2& c) {
    const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (v > 0) return 1;
    if (v < 0) return -1;
    return 0;
}

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
    const int o1 = orient(p1, p2, q1);
    const int o2 = orient(p1, p2, q2);
    const int o3 = orient(q1, q2, p1);
    const int o4 = orient(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

} // namespace

bool polygon_is_simple(const std::vector<Point2>& poly) {
    const size_t n = poly.size();
    if (n < 3) return false;
    for (size_t i = 0; i < n; ++i) {
        const Point2& a1 = poly[i];
        const Point2& a2 = poly[(i + 1) % n];
        for (size_t j = i + 1; j < n; ++j) {
            // skip edges sharing a vertex
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            const Point2& b1 = poly[j];
            const Point2& b2 = poly[(j + 1) % n];
            if (segments_intersect(a1, a2, b1, b2)) return false;
        }
    }
    return true;
}

namespace {

double point_to_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const Point2 ab = b - a;
    const double len2 = ab.dot(ab);
    if (len2 == 0.0) return (p - a).norm();
    double t = (p - a).dot(ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + ab * t)).norm();
}

} // namespace

double point_to_polyline_distance(const Point2& p, const std::vector<Point2>& poly) {
    const size_t n = poly.size();
    if (n == 0) throw std::invalid_argument("point_to_polyline_distance: empty polyline");
    if (n == 1) return (p - poly[0]).norm();
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
        best = std::min(best, point_to_segment_distance(p, poly[i], poly[(i + 1) % n]));
    }
    return best;
}

} // namespace lgeseg
