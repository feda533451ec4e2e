#pragma once

#include <array>
#include <span>

namespace mot3d {

// Upright 3D cuboid in the canonical frame: right-handed, z up, yaw about z,
// center at the geometric center of the box. Lengths in meters, yaw in radians.
//
// Producers keep yaw in (-pi, pi]; normalized() restores that invariant.
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double yaw = 0.0;
  double length = 0.0;  // along heading
  double width = 0.0;   // lateral
  double height = 0.0;  // along z

  bool degenerate() const noexcept { return !(length > 0.0 && width > 0.0 && height > 0.0); }
  double volume() const noexcept { return degenerate() ? 0.0 : length * width * height; }
  double bottom() const noexcept { return cz - 0.5 * height; }
  double top() const noexcept { return cz + 0.5 * height; }

  Box3D normalized() const;

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Selects the ground-plane (x, y) or full (x, y, z) Euclidean distance.
enum class DistanceMode { Ground, Full };

// Wraps theta into (-pi, pi]. Throws InvalidArgument for non-finite input.
double normalize_angle(double theta);

// Counter-clockwise footprint corners, starting at the front-left corner.
std::array<Point2, 4> bev_polygon(const Box3D& box);

// Signed shoelace area; positive for counter-clockwise vertex order.
double polygon_area(std::span<const Point2> vertices);

// Area of the intersection of two box footprints (Sutherland-Hodgman clipping).
double bev_intersection_area(const Box3D& a, const Box3D& b);

// Volume IoU of two upright boxes. Degenerate input yields 0.
double iou_3d(const Box3D& a, const Box3D& b);

double center_distance(const Box3D& a, const Box3D& b, DistanceMode mode = DistanceMode::Ground);

}  // namespace mot3d
