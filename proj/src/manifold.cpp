#include "tethersim/manifold.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace tethersim {

UnitVector3::UnitVector3(const Vec3& v) : v_(v) {
  const double n = v.norm();
  if (std::abs(n - 1.0) > 1e-12) {
    throw std::invalid_argument("UnitVector3: |v| = " + std::to_string(n) +
                                " is not 1 within 1e-12");
  }
  v_ /= n;
}

UnitVector3 UnitVector3::normalized(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("UnitVector3: cannot normalize zero/non-finite vector");
  }
  return UnitVector3(v / n, already_unit{});
}

TangentVector::TangentVector(const UnitVector3& base, const Vec3& v)
    : base_(base), v_(v) {
  if (std::abs(base.dot(v)) > 1e-10) {
    throw std::invalid_argument("TangentVector: base.dot(v) = " +
                                std::to_string(base.dot(v)) +
                                " violates tangency within 1e-10");
  }
}

TangentVector TangentVector::projected(const UnitVector3& base, const Vec3& v) {
  return TangentVector(base, project_tangent(base, v), checked{});
}

RotationMatrix::RotationMatrix(const Mat3& R) : R_(R) {
  if ((R.transpose() * R - Mat3::Identity()).norm() > 1e-10) {
    throw std::invalid_argument("RotationMatrix: R^T R != I within 1e-10");
  }
  if (R.determinant() < 0.0) {
    throw std::invalid_argument("RotationMatrix: det R < 0");
  }
}

RotationMatrix RotationMatrix::identity() {
  return RotationMatrix(Mat3::Identity(), checked{});
}

RotationMatrix RotationMatrix::orthonormalized(const Mat3& R) {
  // Polar factor via SVD; exact rotations pass through unchanged to rounding.
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 Q = svd.matrixU() * svd.matrixV().transpose();
  if (Q.determinant() < 0.0) {
    Mat3 U = svd.matrixU();
    U.col(2) *= -1.0;
    Q = U * svd.matrixV().transpose();
  }
  return RotationMatrix(Q, checked{});
}

Mat3 hat(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return S;
}

Vec3 vee(const Mat3& S) {
  if ((S + S.transpose()).norm() >= 1e-8) {
    throw std::invalid_argument("vee: matrix is not skew-symmetric within 1e-8");
  }
  return Vec3(S(2, 1), S(0, 2), S(1, 0));
}

Mat3 exp_so3(const Vec3& v) {
  const double th2 = v.squaredNorm();
  const double th = std::sqrt(th2);
  double a, b;  // R = I + a*hat(v) + b*hat(v)^2
  if (th < 1e-6) {
    a = 1.0 - th2 / 6.0;
    b = 0.5 - th2 / 24.0;
  } else {
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / th2;
  }
  const Mat3 V = hat(v);
  return Mat3::Identity() + a * V + b * V * V;
}

Vec3 log_so3(const Mat3& R) {
  const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double th = std::acos(c);
  const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (th < 1e-6) {
    return 0.5 * (1.0 + th * th / 6.0) * w;  // th/(2 sin th) series
  }
  if (th > M_PI - 1e-6) {
    // w ~ 2 sin(th) * axis loses the axis near pi; recover it from the
    // symmetric part, (R + R^T)/2 - cos(th) I = (1 - cos(th)) axis axis^T.
    const Mat3 B = 0.5 * (R + R.transpose()) - c * Mat3::Identity();
    int k;
    B.diagonal().maxCoeff(&k);
    Vec3 axis = B.col(k).normalized();
    if (w.norm() > 1e-12 && axis.dot(w) < 0.0) axis = -axis;
    return th * axis;
  }
  return th / (2.0 * std::sin(th)) * w;
}

Vec3 project_tangent(const UnitVector3& q, const Vec3& v) {
  return v - q.vec() * q.dot(v);
}

UnitVector3 rotate_unit(const UnitVector3& q, const TangentVector& omega, double h) {
  return UnitVector3::normalized(exp_so3(h * omega.vec()) * q.vec());
}

}  // namespace tethersim
