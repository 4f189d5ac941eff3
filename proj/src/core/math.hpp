#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace bs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat32 = Eigen::Matrix<double, 3, 2>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Quaternions are stored (w, x, y, z) throughout the project.
inline Mat3 quat_to_rot(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

inline Vec4 quat_normalized(const Vec4& q) { return q / q.norm(); }

// q_a * q_b in Hamilton convention; rotation composition R(a)R(b).
inline Vec4 quat_mul(const Vec4& a, const Vec4& b) {
    return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

inline Vec4 rot_to_quat(const Mat3& r) {
    Eigen::Quaterniond q(r);
    q.normalize();
    Vec4 out(q.w(), q.x(), q.y(), q.z());
    return out[0] < 0 ? Vec4(-out) : out;
}

// Partial derivatives of R(q) w.r.t. the four (unit) quaternion components.
inline void quat_to_rot_jacobian(const Vec4& q, Mat3 dr[4]) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    dr[0] << 0, -2 * z, 2 * y,
        2 * z, 0, -2 * x,
        -2 * y, 2 * x, 0;
    dr[1] << 0, 2 * y, 2 * z,
        2 * y, -4 * x, -2 * w,
        2 * z, 2 * w, -4 * x;
    dr[2] << -4 * y, 2 * x, 2 * w,
        2 * x, 0, 2 * z,
        -2 * w, 2 * z, -4 * y;
    dr[3] << -4 * z, -2 * w, 2 * x,
        2 * w, -4 * z, 2 * y,
        2 * x, 2 * y, 0;
}

// Jacobian of q/|q| w.r.t. q.
inline Mat4 quat_normalize_jacobian(const Vec4& q) {
    const double n = q.norm();
    return (Mat4::Identity() - (q / n) * (q / n).transpose()) / n;
}

inline Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0, -v[2], v[1],
        v[2], 0, -v[0],
        -v[1], v[0], 0;
    return s;
}

// Rodrigues' formula.
inline Mat3 so3_exp(const Vec3& omega) {
    const double theta = omega.norm();
    if (theta < 1e-12) return Mat3::Identity() + skew(omega);
    const Vec3 axis = omega / theta;
    const Mat3 k = skew(axis);
    return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

// atan2 form; well-conditioned near the identity where acos is not.
inline double rotation_angle(const Mat3& r) {
    const Vec3 axis_sin(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return std::atan2(0.5 * axis_sin.norm(), (r.trace() - 1.0) * 0.5);
}

constexpr double kDegPerRad = 180.0 / M_PI;

}  // namespace bs
