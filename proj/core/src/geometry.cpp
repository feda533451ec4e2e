#include "mot3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mot3d/errors.hpp"

namespace mot3d {
namespace {

constexpr double kEdgeTolerance = 1e-9;  // meters; points this close to a clip edge count as inside
constexpr double kMinArea = 1e-12;       // m^2; smaller clipped areas are treated as no overlap

// Fixed-capacity vertex buffer. Clipping a quad by four half-planes yields at most 8 vertices.
struct Polygon {
  std::array<Point2, 16> v{};
  std::size_t n = 0;

  void push(Point2 p) { v[n++] = p; }
};

double cross(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Clips `subject` by the half-plane left of the directed edge e0->e1.
Polygon clip(const Polygon& subject, Point2 e0, Point2 e1) {
  Polygon out;
  if (subject.n == 0) return out;
  const double edge_len = std::hypot(e1.x - e0.x, e1.y - e0.y);
  const double tol = kEdgeTolerance * edge_len;

  Point2 prev = subject.v[subject.n - 1];
  double prev_side = cross(e0, e1, prev);
  for (std::size_t i = 0; i < subject.n; ++i) {
    const Point2 cur = subject.v[i];
    const double cur_side = cross(e0, e1, cur);
    const bool cur_in = cur_side >= -tol;
    const bool prev_in = prev_side >= -tol;
    if (cur_in != prev_in) {
      const double t = prev_side / (prev_side - cur_side);
      out.push({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
    }
    if (cur_in) out.push(cur);
    prev = cur;
    prev_side = cur_side;
  }
  return out;
}

}  // namespace

double normalize_angle(double theta) {
  if (!std::isfinite(theta)) throw InvalidArgument("normalize_angle: non-finite angle");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(theta, two_pi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

Box3D Box3D::normalized() const {
  Box3D b = *this;
  b.yaw = normalize_angle(yaw);
  return b;
}

std::array<Point2, 4> bev_polygon(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  // local (forward, left) offsets in counter-clockwise order
  constexpr std::array<std::array<double, 2>, 4> local{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  std::array<Point2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double fx = local[i][0] * hl;
    const double fy = local[i][1] * hw;
    out[i] = {box.cx + c * fx - s * fy, box.cy + s * fx + c * fy};
  }
  return out;
}

double polygon_area(std::span<const Point2> vertices) {
  const std::size_t n = vertices.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = vertices[i];
    const Point2& q = vertices[(i + 1) % n];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  if (a.degenerate() || b.degenerate()) return 0.0;
  const auto pa = bev_polygon(a);
  const auto pb = bev_polygon(b);

  Polygon poly;
  for (const auto& p : pa) poly.push(p);
  for (std::size_t i = 0; i < 4 && poly.n > 0; ++i) {
    poly = clip(poly, pb[i], pb[(i + 1) % 4]);
  }
  const double area = std::abs(polygon_area(std::span<const Point2>(poly.v.data(), poly.n)));
  return area < kMinArea ? 0.0 : area;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (a.degenerate() || b.degenerate()) return 0.0;
  const double overlap_h = std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom());
  if (overlap_h <= 0.0) return 0.0;
  const double area = bev_intersection_area(a, b);
  if (area <= 0.0) return 0.0;
  const double inter = area * overlap_h;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_distance(const Box3D& a, const Box3D& b, DistanceMode mode) {
  const double dx = a.cx - b.cx;
  const double dy = a.cy - b.cy;
  if (mode == DistanceMode::Ground) return std::hypot(dx, dy);
  return std::sqrt(dx * dx + dy * dy + (a.cz - b.cz) * (a.cz - b.cz));
}

}  // namespace mot3d
