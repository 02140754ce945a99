#pragma once

#include <Eigen/Dense>

// Primitive operations on S^2 and SO(3). Everything here is pure; tolerances
// are the ones enforced at type boundaries throughout the library.

namespace tethersim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Unit vector on S^2. Construction requires |v| = 1 within 1e-12 and stores
// the exactly renormalized value; normalized() accepts any nonzero vector.
class UnitVector3 {
 public:
  explicit UnitVector3(const Vec3& v);
  static UnitVector3 normalized(const Vec3& v);

  const Vec3& vec() const { return v_; }
  double dot(const Vec3& w) const { return v_.dot(w); }

 private:
  struct already_unit {};
  UnitVector3(const Vec3& v, already_unit) : v_(v) {}
  Vec3 v_;
};

// Tangent vector at a base point on S^2: base.dot(vec) = 0 within 1e-10 at
// construction. projected() projects an arbitrary vector onto the tangent
// plane instead of rejecting it.
class TangentVector {
 public:
  TangentVector(const UnitVector3& base, const Vec3& v);
  static TangentVector projected(const UnitVector3& base, const Vec3& v);

  const UnitVector3& base() const { return base_; }
  const Vec3& vec() const { return v_; }

 private:
  struct checked {};
  TangentVector(const UnitVector3& base, const Vec3& v, checked)
      : base_(base), v_(v) {}
  UnitVector3 base_;
  Vec3 v_;
};

// Rotation matrix: R^T R = I within 1e-10 (Frobenius) and det R > 0.
class RotationMatrix {
 public:
  explicit RotationMatrix(const Mat3& R);
  static RotationMatrix identity();
  // Nearest-rotation cleanup of an almost-orthonormal matrix.
  static RotationMatrix orthonormalized(const Mat3& R);

  const Mat3& mat() const { return R_; }

 private:
  struct checked {};
  RotationMatrix(const Mat3& R, checked) : R_(R) {}
  Mat3 R_;
};

// hat(v) w = v x w for all w.
Mat3 hat(const Vec3& v);

// Inverse of hat; rejects matrices with |S + S^T| >= 1e-8.
Vec3 vee(const Mat3& S);

// Rodrigues formula, series branch below |v| = 1e-6. Exactly orthonormal up
// to rounding for any |v| including pi and 2*pi.
Mat3 exp_so3(const Vec3& v);

// Rotation vector of R (inverse of exp_so3 on |v| <= pi).
Vec3 log_so3(const Mat3& R);

// (I - q q^T) v, computed as v - q (q.v).
Vec3 project_tangent(const UnitVector3& q, const Vec3& v);

// Exact transport exp_so3(h*omega) q of a unit vector by a tangent angular
// velocity; reduces to q + h (omega x q) + O(h^2).
UnitVector3 rotate_unit(const UnitVector3& q, const TangentVector& omega, double h);

}  // namespace tethersim
