#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace locoforge {

// Planar (sagittal x-z plane) spatial algebra. Motion vectors are
// (omega, vx, vy), force vectors (torque, fx, fy), with "y" naming the
// plane's second axis (world z). Angles are counterclockwise.

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline Mat2 rot2(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

// d/dtheta of rot2
inline Mat2 drot2(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat2 r;
  r << -s, -c, c, -s;
  return r;
}

inline Vec2 perp(const Vec2& p) { return Vec2(-p.y(), p.x()); }

inline double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Frame placement of a child frame in its parent: rotation then origin.
struct PlanarXform {
  Mat2 rot = Mat2::Identity();  // child axes in parent coordinates
  Vec2 pos = Vec2::Zero();      // child origin in parent coordinates
};

inline PlanarXform make_xform(double theta, const Vec2& pos) {
  return PlanarXform{rot2(theta), pos};
}

// Motion vector expressed in parent -> expressed in child.
inline Vec3 motion_to_child(const PlanarXform& x, const Vec3& m) {
  const double w = m[0];
  const Vec2 v(m[1], m[2]);
  const Vec2 vc = x.rot.transpose() * (v + w * perp(x.pos));
  return Vec3(w, vc.x(), vc.y());
}

// Force vector expressed in child -> expressed in parent.
inline Vec3 force_to_parent(const PlanarXform& x, const Vec3& f) {
  const Vec2 fp = x.rot * Vec2(f[1], f[2]);
  return Vec3(f[0] + cross2(x.pos, fp), fp.x(), fp.y());
}

// Motion-vector cross product v x m.
inline Vec3 crm(const Vec3& v, const Vec3& m) {
  return Vec3(0.0,
              v[2] * m[0] - v[0] * m[2],
              -v[1] * m[0] + v[0] * m[1]);
}

// Force-vector cross product v x* f.
inline Vec3 crf(const Vec3& v, const Vec3& f) {
  return Vec3(v[1] * f[2] - v[2] * f[1],
              -v[0] * f[2],
              v[0] * f[1]);
}

// Spatial inertia of a rigid body about the frame origin, given mass,
// rotational inertia about the com and the com position in the frame.
inline Mat3 spatial_inertia(double mass, double inertia_com, const Vec2& com) {
  Mat3 I;
  const Vec2 h = mass * perp(com);
  I(0, 0) = inertia_com + mass * com.squaredNorm();
  I(0, 1) = h.x();
  I(0, 2) = h.y();
  I(1, 0) = h.x();
  I(2, 0) = h.y();
  I.bottomRightCorner<2, 2>() = mass * Mat2::Identity();
  return I;
}

// 3x3 matrix mapping parent-frame motion vectors to child-frame ones.
inline Mat3 motion_matrix(const PlanarXform& x) {
  Mat3 t = Mat3::Zero();
  t(0, 0) = 1.0;
  const Vec2 col0 = x.rot.transpose() * perp(x.pos);
  t(1, 0) = col0.x();
  t(2, 0) = col0.y();
  t.bottomRightCorner<2, 2>() = x.rot.transpose();
  return t;
}

// Composite inertia expressed in the child frame -> parent frame.
inline Mat3 inertia_to_parent(const PlanarXform& x, const Mat3& inertia) {
  const Mat3 t = motion_matrix(x);
  return t.transpose() * inertia * t;
}

}  // namespace locoforge
