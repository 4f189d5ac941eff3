#include "core/types.hpp"

namespace bs {

void validate_cloud(const GaussianCloud& cloud) {
    require(cloud.sh_degree >= 0 && cloud.sh_degree <= 3, "sh_degree must be in [0, 3]");
    const size_t want = static_cast<size_t>(cloud.sh_coeff_count());
    for (size_t i = 0; i < cloud.gaussians.size(); ++i) {
        const Gaussian3D& g = cloud.gaussians[i];
        if (g.sh.size() != want)
            throw_invalid("gaussian " + std::to_string(i) + ": sh coefficient count " +
                          std::to_string(g.sh.size()) + " != " + std::to_string(want));
        if (std::abs(g.rotation.norm() - 1.0) > 1e-6)
            throw_invalid("gaussian " + std::to_string(i) + ": rotation quaternion not unit");
    }
}

void validate_intrinsics(const CameraIntrinsics& intr) {
    require(intr.fx > 0 && intr.fy > 0, "focal lengths must be positive");
    require(intr.width > 0 && intr.height > 0, "image size must be positive");
    require(intr.cx > 0 && intr.cx < intr.width, "cx out of range");
    require(intr.cy > 0 && intr.cy < intr.height, "cy out of range");
}

Mat3 build_covariance(const Vec4& rotation, const Vec3& scale) {
    const Mat3 r = quat_to_rot(quat_normalized(rotation));
    const Mat3 m = r * scale.asDiagonal();
    return m * m.transpose();
}

}  // namespace bs
