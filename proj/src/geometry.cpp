#include "reflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "reflow/error.hpp"

namespace reflow::geometry {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double cross(Point o, Point a, Point b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Intersection of segment p->q with the infinite line through a->b.
Point intersect(Point p, Point q, Point a, Point b) {
    const double dp = cross(a, b, p);
    const double dq = cross(a, b, q);
    const double t = dp / (dp - dq);
    return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

std::array<Point, 4> Rect2D::corners() const {
    const double c = std::cos(rotation * kDegToRad);
    const double s = std::sin(rotation * kDegToRad);
    const double hx = 0.5 * length;
    const double hy = 0.5 * width;
    auto place = [&](double lx, double ly) {
        return Point{center_x + c * lx - s * ly, center_y + s * lx + c * ly};
    };
    return {place(-hx, -hy), place(hx, -hy), place(hx, hy), place(-hx, hy)};
}

void Rect2D::validate() const {
    if (!(length > 0.0) || !(width > 0.0) || !std::isfinite(length) || !std::isfinite(width)) {
        throw Error(ErrorKind::InvalidArgument, "rectangle extents must be positive");
    }
    if (!std::isfinite(center_x) || !std::isfinite(center_y)) {
        throw Error(ErrorKind::InvalidArgument, "rectangle center must be finite");
    }
    if (!(rotation > -180.0 && rotation <= 180.0)) {
        throw Error(ErrorKind::InvalidArgument,
                    "rectangle rotation must lie in (-180, 180], got " + std::to_string(rotation));
    }
}

double PadPair::pitch() const {
    return std::hypot(pad2.center_x - pad1.center_x, pad2.center_y - pad1.center_y);
}

void PadPair::validate() const {
    pad1.validate();
    pad2.validate();
    if (pad1.rotation != 0.0 || pad2.rotation != 0.0) {
        throw Error(ErrorKind::InvalidArgument, "pads must be unrotated");
    }
    if (convex_overlap_area(pad1, pad2) > 0.0) {
        throw Error(ErrorKind::InvalidArgument, "pads must be disjoint");
    }
}

double wrap_degrees(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r <= -180.0) r += 360.0;
    if (r > 180.0) r -= 360.0;
    return r;
}

double polygon_area(const Polygon& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % n];
        twice += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(twice);
}

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
    Polygon output = subject;
    const std::size_t m = clip.size();
    for (std::size_t e = 0; e < m && !output.empty(); ++e) {
        const Point a = clip[e];
        const Point b = clip[(e + 1) % m];
        Polygon input;
        input.swap(output);
        const std::size_t n = input.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point cur = input[i];
            const Point prev = input[(i + n - 1) % n];
            const bool cur_in = cross(a, b, cur) >= 0.0;
            const bool prev_in = cross(a, b, prev) >= 0.0;
            if (cur_in) {
                if (!prev_in) output.push_back(intersect(prev, cur, a, b));
                output.push_back(cur);
            } else if (prev_in) {
                output.push_back(intersect(prev, cur, a, b));
            }
        }
    }
    return output;
}

double convex_overlap_area(const Rect2D& a, const Rect2D& b) {
    const auto ca = a.corners();
    const auto cb = b.corners();
    const Polygon pa(ca.begin(), ca.end());
    const Polygon pb(cb.begin(), cb.end());
    const double area = polygon_area(clip_convex(pa, pb));
    // Clipping round-off can nudge the result a few ulps past the true bounds.
    return std::clamp(area, 0.0, std::min(a.area(), b.area()));
}

double contact_area(const Rect2D& paste_footprint, const Rect2D& target) {
    return convex_overlap_area(paste_footprint, target);
}

double noncontact_area(const Rect2D& paste_footprint, const Rect2D& target) {
    return std::max(0.0, paste_footprint.area() - contact_area(paste_footprint, target));
}

double effective_volume(double volume, const Rect2D& paste_footprint, const Rect2D& target) {
    return volume * contact_area(paste_footprint, target) / paste_footprint.area();
}

Pose relative_pose(const Pose& subject, const Pose& reference) {
    return {subject.dx - reference.dx, subject.dy - reference.dy,
            wrap_degrees(subject.dtheta - reference.dtheta)};
}

}  // namespace reflow::geometry
