#pragma once

#include <vector>

#include "core/error.hpp"
#include "core/math.hpp"

namespace bs {

/// One anisotropic 3D Gaussian. Scale is kept as log-scale and opacity as a
/// pre-sigmoid logit so positivity and (0,1) bounds hold by construction.
struct Gaussian3D {
    Vec3 position = Vec3::Zero();
    Vec4 rotation = Vec4(1, 0, 0, 0);  // unit quaternion (w, x, y, z)
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    std::vector<double> sh;  // 3 * (degree + 1)^2, layout sh[3 * k + channel]

    Vec3 scale() const { return log_scale.array().exp(); }
    double opacity() const { return sigmoid(opacity_logit); }
};

struct GaussianCloud {
    std::vector<Gaussian3D> gaussians;
    int sh_degree = 1;

    size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }
    int sh_coeff_count() const { return 3 * (sh_degree + 1) * (sh_degree + 1); }
};

inline int sh_coeffs_for_degree(int degree) { return 3 * (degree + 1) * (degree + 1); }

// Checks member coefficient counts and quaternion norms.
void validate_cloud(const GaussianCloud& cloud);

struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;
};

void validate_intrinsics(const CameraIntrinsics& intr);

/// World-to-camera transform: x_cam = R(q) * x_world + t.
struct CameraPose {
    Vec4 q = Vec4(1, 0, 0, 0);
    Vec3 t = Vec3::Zero();

    Mat3 rotation() const { return quat_to_rot(quat_normalized(q)); }
    Vec3 camera_center() const { return -rotation().transpose() * t; }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = rotation();
        m.topRightCorner<3, 1>() = t;
        return m;
    }

    static CameraPose from_matrix(const Mat4& m) {
        CameraPose p;
        p.q = rot_to_quat(m.topLeftCorner<3, 3>());
        p.t = m.topRightCorner<3, 1>();
        return p;
    }

    /// Composition: (a * b) applies b first, then a.
    friend CameraPose operator*(const CameraPose& a, const CameraPose& b) {
        CameraPose out;
        out.q = quat_normalized(quat_mul(quat_normalized(a.q), quat_normalized(b.q)));
        out.t = a.rotation() * b.t + a.t;
        return out;
    }

    /// Left perturbation by a tangent step: R <- R(omega) R, t <- R(omega) t + v.
    CameraPose perturbed(const Vec3& omega, const Vec3& v) const {
        const Mat3 dr = so3_exp(omega);
        CameraPose out;
        out.q = rot_to_quat(dr * rotation());
        out.t = dr * t + v;
        return out;
    }

    CameraPose inverse() const {
        const Mat3 rt = rotation().transpose();
        CameraPose out;
        out.q = rot_to_quat(rt);
        out.t = -(rt * t);
        return out;
    }
};

/// Row-major interleaved image, values in [0, 1].
struct ImageBuffer {
    int width = 0, height = 0, channels = 3;
    std::vector<double> data;

    ImageBuffer() = default;
    ImageBuffer(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    bool same_shape(const ImageBuffer& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// Single-channel depth in world units. 0 marks "no surface".
struct DepthMap {
    static constexpr double kNoSurface = 0.0;

    int width = 0, height = 0;
    std::vector<double> data;

    DepthMap() = default;
    DepthMap(int w, int h, double fill = kNoSurface)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

/// Covariance from the factored form: Sigma = R S S^T R^T with S = diag(scale).
Mat3 build_covariance(const Vec4& rotation, const Vec3& scale);

}  // namespace bs
