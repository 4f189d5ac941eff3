#pragma once

#include <span>

#include "core/math.hpp"

namespace bs {

// Real spherical-harmonics basis, standard splatting sign convention.
inline constexpr double kSH0 = 0.28209479177387814;
inline constexpr double kSH1 = 0.4886025119029199;

/// Fills values[0 .. (degree+1)^2) with basis functions of a unit direction.
void sh_basis(const Vec3& dir, int degree, double* values);

/// Basis plus d(basis)/d(dir); grads is (degree+1)^2 rows of 3.
void sh_basis_grad(const Vec3& dir, int degree, double* values, Vec3* grads);

/// RGB = clamp(0.5 + sum_k basis_k * sh[3k + c], 0, 1). sh holds 3*(degree+1)^2
/// coefficients interleaved per basis function.
Vec3 eval_sh(std::span<const double> sh, const Vec3& dir, int degree);

/// Adjoint of eval_sh. d_sh must have sh.size() entries (accumulated into);
/// d_dir is accumulated as well. Clamped channels pass zero gradient.
void eval_sh_backward(std::span<const double> sh, const Vec3& dir, int degree,
                      const Vec3& upstream, std::span<double> d_sh, Vec3& d_dir);

}  // namespace bs
