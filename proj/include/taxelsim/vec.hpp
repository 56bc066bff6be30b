// Copyright 2026 The taxelsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>

namespace taxelsim {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
inline bool operator==(const Vec3& a, const Vec3& b) {
  return a.x == b.x && a.y == b.y && a.z == b.z;
}

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm_squared(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Returns the zero vector for inputs too short to normalize.
inline Vec3 normalized(const Vec3& a) {
  double n = norm(a);
  return n > 0.0 ? a / n : Vec3{};
}

inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Unit quaternion, scalar-first.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 vec() const { return {x, y, z}; }
};

inline Quat conjugate(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

inline double norm(const Quat& q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

inline Quat normalized(const Quat& q) {
  double n = norm(q);
  if (n <= 0.0) return Quat{};
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

inline Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Vec3 rotate(const Quat& q, const Vec3& v) {
  Vec3 u = q.vec();
  Vec3 t = cross(u, v) * 2.0;
  return v + t * q.w + cross(u, t);
}

inline Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  Vec3 a = normalized(axis);
  double h = 0.5 * angle;
  double s = std::sin(h);
  return {std::cos(h), a.x * s, a.y * s, a.z * s};
}

// Rotation angle and axis of q, as axis*angle. Identity maps to zero.
inline Vec3 quat_log_vector(const Quat& q) {
  Quat u = normalized(q);
  double vn = norm(u.vec());
  if (vn < 1e-15) return {};
  double angle = 2.0 * std::atan2(vn, u.w);
  if (angle > 3.14159265358979323846) angle -= 2.0 * 3.14159265358979323846;
  return u.vec() * (angle / vn);
}

struct Aabb {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return (min + max) * 0.5; }
  bool valid() const { return min.x <= max.x && min.y <= max.y && min.z <= max.z; }
  // Closed-box membership.
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
           p.z >= min.z && p.z <= max.z;
  }
};

// Pose (rotation + translation) and twist (angular + linear velocity) of a
// rigid body.
struct RigidState {
  Quat rotation;
  Vec3 translation;
  Vec3 angular_velocity;
  Vec3 linear_velocity;
};

inline Vec3 transform_point(const RigidState& s, const Vec3& local) {
  return rotate(s.rotation, local) + s.translation;
}

inline Vec3 inverse_transform_point(const RigidState& s, const Vec3& world) {
  return rotate(conjugate(s.rotation), world - s.translation);
}

// Velocity of the body-fixed material point currently at `world_point`.
inline Vec3 point_velocity(const RigidState& s, const Vec3& world_point) {
  return s.linear_velocity + cross(s.angular_velocity, world_point - s.translation);
}

}  // namespace taxelsim
