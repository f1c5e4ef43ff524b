// Core 3D/2D geometry: rigid transforms, pinhole projection, oriented boxes
// and IoU.
//
// Conventions: the LiDAR frame is right-handed with z up; yaw is measured
// about +z from +x. A Box3D's length l runs along its heading, width w along
// the heading rotated by +90 degrees. Camera frames are x right, y down,
// z forward.
#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace spl::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const Vec3 d = a - b;
  return dot(d, d);
}
inline double distance(const Vec3& a, const Vec3& b) { return std::sqrt(squared_distance(a, b)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 rot_z(double yaw);
  static Mat3 rot_y(double angle);
  static Mat3 rot_x(double angle);

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
  double& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }
  Mat3 transpose() const;
  double determinant() const;
  friend bool operator==(const Mat3&, const Mat3&) = default;
};

Vec3 operator*(const Mat3& a, const Vec3& v);
Mat3 operator*(const Mat3& a, const Mat3& b);

// p -> rotation * p + translation.
struct RigidTransform {
  Mat3 rotation;
  Vec3 translation;

  static RigidTransform identity() { return {}; }
  static RigidTransform from_yaw(double yaw, const Vec3& t) { return {Mat3::rot_z(yaw), t}; }
  // Row-major 3x4 [R | t].
  static RigidTransform from_3x4(std::span<const double, 12> v);
  std::array<double, 12> to_3x4() const;

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_rotation(const Vec3& v) const { return rotation * v; }
  RigidTransform inverse() const;
  // (*this)(other(p)).
  RigidTransform compose(const RigidTransform& other) const;
  // Orthonormal rotation with det +1 within tol, finite translation.
  bool is_valid(double tol = 1e-9) const;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  Vec3 pos() const { return {x, y, z}; }
  friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloud {
  std::vector<Point> points;
  int frame_id = 0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  std::vector<Vec3> positions() const;
  // All coordinates finite and intensity in [0, 1].
  bool is_valid() const;
};

PointCloud transform_points(const PointCloud& cloud, const RigidTransform& tf);

struct CameraModel {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int image_w = 0;
  int image_h = 0;
  RigidTransform lidar_to_cam;

  bool is_valid() const;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool in_image = false;
};

// Projects a LiDAR-frame point. Points with camera depth <= 0 are flagged out
// with u = v = 0.
Projection project_point(const Vec3& lidar_point, const CameraModel& cam);
std::vector<Projection> project_points(const PointCloud& cloud, const CameraModel& cam);
// Camera-frame point at the given pixel and depth.
Vec3 back_project(double u, double v, double depth, const CameraModel& cam);

double normalize_angle(double a);  // into (-pi, pi]

struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;

  Vec3 center() const { return {cx, cy, cz}; }
  double z_min() const { return cz - 0.5 * h; }
  double z_max() const { return cz + 0.5 * h; }
  bool is_valid() const { return l > 0.0 && w > 0.0 && h > 0.0; }
  friend bool operator==(const Box3D&, const Box3D&) = default;
};

// Bottom face counter-clockwise (seen from above) starting at (+l/2, +w/2),
// then the top face in the same order.
std::array<Vec3, 8> box3d_corners(const Box3D& box);
// Counter-clockwise BEV footprint.
std::array<Vec2, 4> bev_corners(const Box3D& box);
bool point_in_box(const Box3D& box, const Vec3& p);
// Point expressed in the box frame (origin at center, x along heading).
Vec3 to_box_frame(const Box3D& box, const Vec3& p);

struct Rect2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool is_valid() const { return x_min <= x_max && y_min <= y_max; }
};

double iou_rect2d(const Rect2D& a, const Rect2D& b);

double polygon_area(std::span<const Vec2> poly);  // signed, CCW positive
// Sutherland-Hodgman clipping of `subject` by the convex CCW polygon `clip`.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

double bev_intersection_area(const Box3D& a, const Box3D& b);
double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

}  // namespace spl::geom
