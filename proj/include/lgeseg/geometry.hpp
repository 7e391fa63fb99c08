#ifndef LGESEG_GEOMETRY_HPP
#define LGESEG_GEOMETRY_HPP

#include <cmath>
#include <vector>

namespace lgeseg {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    Point2() = default;
    Point2(double px, double py) : x(px), y(py) {}

    Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
    Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
    Point2 operator*(double s) const { return {x * s, y * s}; }
    Point2& operator+=(const Point2& o) { x += o.x; y += o.y; return *this; }
    Point2& operator-=(const Point2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Point2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
    /// Counterclockwise perpendicular (rotate +90 degrees).
    Point2 perp() const { return {-y, x}; }
};

inline Point2 operator*(double s, const Point2& p) { return p * s; }

/// Signed area of a closed polygon (positive for counterclockwise order).
double polygon_signed_area(const std::vector<Point2>& poly);

/// Area centroid of a simple closed polygon. Throws on (near-)zero area.
Point2 polygon_centroid(const std::vector<Point2>& poly);

/// Even-odd (crossing number) point-in-polygon test.
bool point_in_polygon(const Point2& p, const std::vector<Point2>& poly);

/// True if no two non-adjacent edges of the closed polygon intersect.
bool polygon_is_simple(const std::vector<Point2>& poly);

/// Distance from point p to the closed polyline through poly's vertices.
double point_to_polyline_distance(const Point2& p, const std::vector<Point2>& poly);

} // namespace lgeseg

#endif
