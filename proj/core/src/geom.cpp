#include "spl/geom.hpp"

#include <algorithm>
#include <numbers>

namespace spl::geom {

Mat3 Mat3::rot_z(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {{c, -s, 0, s, c, 0, 0, 0, 1}};
}

Mat3 Mat3::rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{c, 0, s, 0, 1, 0, -s, 0, c}};
}

Mat3 Mat3::rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{1, 0, 0, 0, c, -s, 0, s, c}};
}

Mat3 Mat3::transpose() const {
  Mat3 t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
  return t;
}

double Mat3::determinant() const {
  const auto& a = *this;
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Vec3 operator*(const Mat3& a, const Vec3& v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
          a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
          a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
    }
  }
  return out;
}

RigidTransform RigidTransform::from_3x4(std::span<const double, 12> v) {
  RigidTransform tf;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) tf.rotation(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
  }
  tf.translation = {v[3], v[7], v[11]};
  return tf;
}

std::array<double, 12> RigidTransform::to_3x4() const {
  std::array<double, 12> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(r * 4 + c)] = rotation(r, c);
  }
  out[3] = translation.x;
  out[7] = translation.y;
  out[11] = translation.z;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -1.0 * (inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

bool RigidTransform::is_valid(double tol) const {
  for (double x : rotation.m) {
    if (!std::isfinite(x)) return false;
  }
  if (!std::isfinite(translation.x) || !std::isfinite(translation.y) || !std::isfinite(translation.z))
    return false;
  const Mat3 rrt = rotation * rotation.transpose();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (std::abs(rrt(r, c) - (r == c ? 1.0 : 0.0)) > tol) return false;
    }
  }
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

std::vector<Vec3> PointCloud::positions() const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.pos());
  return out;
}

bool PointCloud::is_valid() const {
  return std::all_of(points.begin(), points.end(), [](const Point& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) && p.intensity >= 0.0 &&
           p.intensity <= 1.0;
  });
}

PointCloud transform_points(const PointCloud& cloud, const RigidTransform& tf) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    const Vec3 q = tf.apply(p.pos());
    out.points.push_back({q.x, q.y, q.z, p.intensity});
  }
  return out;
}

bool CameraModel::is_valid() const {
  return fx > 0.0 && fy > 0.0 && image_w > 0 && image_h > 0 && std::isfinite(cx) &&
         std::isfinite(cy) && lidar_to_cam.is_valid(1e-6);
}

Projection project_point(const Vec3& lidar_point, const CameraModel& cam) {
  const Vec3 pc = cam.lidar_to_cam.apply(lidar_point);
  Projection pr;
  pr.depth = pc.z;
  if (pc.z <= 0.0) return pr;
  pr.u = cam.fx * pc.x / pc.z + cam.cx;
  pr.v = cam.fy * pc.y / pc.z + cam.cy;
  pr.in_image = pr.u >= 0.0 && pr.u < cam.image_w && pr.v >= 0.0 && pr.v < cam.image_h;
  return pr;
}

std::vector<Projection> project_points(const PointCloud& cloud, const CameraModel& cam) {
  std::vector<Projection> out;
  out.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.push_back(project_point(p.pos(), cam));
  return out;
}

Vec3 back_project(double u, double v, double depth, const CameraModel& cam) {
  return {(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth};
}

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

std::array<Vec3, 8> box3d_corners(const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hl = 0.5 * box.l, hw = 0.5 * box.w, hh = 0.5 * box.h;
  constexpr std::array<std::array<double, 2>, 4> signs{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  std::array<Vec3, 8> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const double lx = signs[i][0] * hl, ly = signs[i][1] * hw;
    const double x = box.cx + c * lx - s * ly;
    const double y = box.cy + s * lx + c * ly;
    out[i] = {x, y, box.cz - hh};
    out[i + 4] = {x, y, box.cz + hh};
  }
  return out;
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const auto c3 = box3d_corners(box);
  return {Vec2{c3[0].x, c3[0].y}, Vec2{c3[1].x, c3[1].y}, Vec2{c3[2].x, c3[2].y},
          Vec2{c3[3].x, c3[3].y}};
}

Vec3 to_box_frame(const Box3D& box, const Vec3& p) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double dx = p.x - box.cx, dy = p.y - box.cy;
  return {c * dx + s * dy, -s * dx + c * dy, p.z - box.cz};
}

bool point_in_box(const Box3D& box, const Vec3& p) {
  const Vec3 q = to_box_frame(box, p);
  return std::abs(q.x) <= 0.5 * box.l && std::abs(q.y) <= 0.5 * box.w && std::abs(q.z) <= 0.5 * box.h;
}

double iou_rect2d(const Rect2D& a, const Rect2D& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double polygon_area(std::span<const Vec2> poly) {
  double acc = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) acc += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * acc;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  const std::size_t n = clip.size();
  for (std::size_t e = 0; e < n && !output.empty(); ++e) {
    const Vec2 a = clip[e], b = clip[(e + 1) % n];
    const Vec2 edge = b - a;
    auto side = [&](Vec2 p) { return cross(edge, p - a); };  // >= 0: inside (left of edge)
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2 cur = input[i];
      const Vec2 prev = input[(i + input.size() - 1) % input.size()];
      const double sc = side(cur), sp = side(prev);
      if (sc >= 0.0) {
        if (sp < 0.0) output.push_back(prev + (sp / (sp - sc)) * (cur - prev));
        output.push_back(cur);
      } else if (sp >= 0.0) {
        output.push_back(prev + (sp / (sp - sc)) * (cur - prev));
      }
    }
  }
  return output;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto pa = bev_corners(a);
  const auto pb = bev_corners(b);
  // Cheap reject on circumscribed circles.
  const double ra = 0.5 * std::hypot(a.l, a.w), rb = 0.5 * std::hypot(b.l, b.w);
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) > ra + rb) return 0.0;
  const auto poly = clip_convex(pa, pb);
  if (poly.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(poly));
}

double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  const double uni = a.l * a.w + b.l * b.w - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double dz = std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min());
  if (dz <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * dz;
  const double uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace spl::geom
