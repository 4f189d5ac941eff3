#include "core/sh.hpp"

#include "core/error.hpp"

namespace bs {

namespace {
constexpr double kSH2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                            -1.0925484305920792, 0.5462742152960396};
constexpr double kSH3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                            0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                            -0.5900435899266435};
}  // namespace

void sh_basis(const Vec3& dir, int degree, double* v) {
    const double x = dir[0], y = dir[1], z = dir[2];
    v[0] = kSH0;
    if (degree < 1) return;
    v[1] = -kSH1 * y;
    v[2] = kSH1 * z;
    v[3] = -kSH1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    v[4] = kSH2[0] * x * y;
    v[5] = kSH2[1] * y * z;
    v[6] = kSH2[2] * (2 * zz - xx - yy);
    v[7] = kSH2[3] * x * z;
    v[8] = kSH2[4] * (xx - yy);
    if (degree < 3) return;
    v[9] = kSH3[0] * y * (3 * xx - yy);
    v[10] = kSH3[1] * x * y * z;
    v[11] = kSH3[2] * y * (4 * zz - xx - yy);
    v[12] = kSH3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    v[13] = kSH3[4] * x * (4 * zz - xx - yy);
    v[14] = kSH3[5] * z * (xx - yy);
    v[15] = kSH3[6] * x * (xx - 3 * yy);
}

void sh_basis_grad(const Vec3& dir, int degree, double* v, Vec3* g) {
    sh_basis(dir, degree, v);
    const double x = dir[0], y = dir[1], z = dir[2];
    g[0] = Vec3::Zero();
    if (degree < 1) return;
    g[1] = Vec3(0, -kSH1, 0);
    g[2] = Vec3(0, 0, kSH1);
    g[3] = Vec3(-kSH1, 0, 0);
    if (degree < 2) return;
    g[4] = kSH2[0] * Vec3(y, x, 0);
    g[5] = kSH2[1] * Vec3(0, z, y);
    g[6] = kSH2[2] * Vec3(-2 * x, -2 * y, 4 * z);
    g[7] = kSH2[3] * Vec3(z, 0, x);
    g[8] = kSH2[4] * Vec3(2 * x, -2 * y, 0);
    if (degree < 3) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    g[9] = kSH3[0] * Vec3(6 * x * y, 3 * xx - 3 * yy, 0);
    g[10] = kSH3[1] * Vec3(y * z, x * z, x * y);
    g[11] = kSH3[2] * Vec3(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
    g[12] = kSH3[3] * Vec3(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
    g[13] = kSH3[4] * Vec3(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
    g[14] = kSH3[5] * Vec3(2 * x * z, -2 * y * z, xx - yy);
    g[15] = kSH3[6] * Vec3(3 * xx - 3 * yy, -6 * x * y, 0);
}

Vec3 eval_sh(std::span<const double> sh, const Vec3& dir, int degree) {
    const int n = (degree + 1) * (degree + 1);
    if (static_cast<int>(sh.size()) != 3 * n)
        throw_invalid("eval_sh: expected " + std::to_string(3 * n) + " coefficients, got " +
                      std::to_string(sh.size()));
    double basis[16];
    sh_basis(dir, degree, basis);
    Vec3 color(0.5, 0.5, 0.5);
    for (int k = 0; k < n; ++k)
        for (int c = 0; c < 3; ++c) color[c] += basis[k] * sh[3 * k + c];
    return color.cwiseMax(0.0).cwiseMin(1.0);
}

void eval_sh_backward(std::span<const double> sh, const Vec3& dir, int degree,
                      const Vec3& upstream, std::span<double> d_sh, Vec3& d_dir) {
    const int n = (degree + 1) * (degree + 1);
    double basis[16];
    Vec3 basis_grad[16];
    sh_basis_grad(dir, degree, basis, basis_grad);

    Vec3 raw(0.5, 0.5, 0.5);
    for (int k = 0; k < n; ++k)
        for (int c = 0; c < 3; ++c) raw[c] += basis[k] * sh[3 * k + c];

    Vec3 up = upstream;
    for (int c = 0; c < 3; ++c)
        if (raw[c] <= 0.0 || raw[c] >= 1.0) up[c] = 0.0;

    for (int k = 0; k < n; ++k) {
        for (int c = 0; c < 3; ++c) d_sh[3 * k + c] += basis[k] * up[c];
        double coeff_dot = 0.0;
        for (int c = 0; c < 3; ++c) coeff_dot += sh[3 * k + c] * up[c];
        d_dir += basis_grad[k] * coeff_dot;
    }
}

}  // namespace bs
