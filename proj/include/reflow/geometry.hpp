#pragma once

#include <array>
#include <vector>

namespace reflow::geometry {

// Units: lengths in mm, areas in mm^2, volumes in mm^3, pose offsets in um,
// angles in degrees (counterclockwise positive, wrapped to (-180, 180]).

inline constexpr double kUmPerMm = 1000.0;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

using Polygon = std::vector<Point>;

/// Rectangle in the board plane, rotated about its own center.
struct Rect2D {
    double center_x = 0.0;  // mm
    double center_y = 0.0;  // mm
    double length = 0.0;    // extent along local x, mm
    double width = 0.0;     // extent along local y, mm
    double rotation = 0.0;  // deg

    double area() const { return length * width; }

    /// Corners in counterclockwise order.
    std::array<Point, 4> corners() const;

    /// Throws InvalidArgument unless length > 0, width > 0 and rotation lies
    /// in (-180, 180].
    void validate() const;
};

/// The two lands of a two-terminal chip. The midpoint of the pad centers is
/// the reference point for every offset.
struct PadPair {
    Rect2D pad1;
    Rect2D pad2;

    Point reference() const {
        return {0.5 * (pad1.center_x + pad2.center_x), 0.5 * (pad1.center_y + pad2.center_y)};
    }
    double pitch() const;

    /// Pads must be valid, unrotated and disjoint.
    void validate() const;
};

/// Offset relative to some reference: dx, dy in um, dtheta in degrees.
struct Pose {
    double dx = 0.0;
    double dy = 0.0;
    double dtheta = 0.0;

    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Maps any angle in degrees onto (-180, 180].
double wrap_degrees(double deg);

double polygon_area(const Polygon& poly);

/// Sutherland-Hodgman clip of `subject` against a convex counterclockwise
/// `clip` polygon.
Polygon clip_convex(const Polygon& subject, const Polygon& clip);

/// Exact intersection area of two (possibly rotated) rectangles.
double convex_overlap_area(const Rect2D& a, const Rect2D& b);

double contact_area(const Rect2D& paste_footprint, const Rect2D& target);

/// Paste footprint area not in contact with target; never negative.
double noncontact_area(const Rect2D& paste_footprint, const Rect2D& target);

/// Paste volume apportioned to the contacted fraction of the footprint,
/// assuming uniform deposit height.
double effective_volume(double volume, const Rect2D& paste_footprint, const Rect2D& target);

/// subject - reference, component-wise, with the angle wrapped.
Pose relative_pose(const Pose& subject, const Pose& reference);

}  // namespace reflow::geometry
