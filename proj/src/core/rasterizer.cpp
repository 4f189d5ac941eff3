#include "core/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/sh.hpp"

namespace bs {

namespace {

constexpr int kTileSize = 16;
const double kLogAlphaFloor = std::log(kAlphaFloor);

struct RasterGaussian {
    Vec2 mean2d;
    double inv00, inv01, inv11;  // inverse of cov2d
    double depth;
    Vec3 color;
    double sigma;  // activated opacity
    int x0, x1, y0, y1;  // pixel bounds, half-open
    int index;           // into the cloud
};

struct Context {
    ProjectResult proj;
    std::vector<RasterGaussian> ordered;  // visible, sorted front-to-back
    std::vector<std::vector<int>> tiles;  // indices into `ordered`, per tile
    int tiles_x = 0, tiles_y = 0;
};

Context build_context(const GaussianCloud& cloud, const CameraPose& pose,
                      const CameraIntrinsics& intr, const RenderOptions& opts) {
    Context ctx;
    ctx.proj = project(cloud, pose, intr);

    std::vector<int> order;
    order.reserve(cloud.size());
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i)
        if (ctx.proj.visible[i]) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = ctx.proj.gaussians[a].depth, db = ctx.proj.gaussians[b].depth;
        return da < db || (da == db && a < b);
    });

    ctx.ordered.reserve(order.size());
    for (int idx : order) {
        const ProjectedGaussian& p = ctx.proj.gaussians[idx];
        RasterGaussian g;
        g.mean2d = p.mean2d;
        const double det = p.cov2d(0, 0) * p.cov2d(1, 1) - p.cov2d(0, 1) * p.cov2d(1, 0);
        g.inv00 = p.cov2d(1, 1) / det;
        g.inv01 = -p.cov2d(0, 1) / det;
        g.inv11 = p.cov2d(0, 0) / det;
        g.depth = p.depth;
        g.color = p.color;
        g.sigma = p.alpha_peak;
        if (opts.bbox_sigma > 0) {
            // Conservative radius from the dominant eigenvalue.
            const double mid = 0.5 * (p.cov2d(0, 0) + p.cov2d(1, 1));
            const double disc = std::sqrt(std::max(0.0, mid * mid - det));
            const double radius = opts.bbox_sigma * std::sqrt(std::max(1e-12, mid + disc)) + 1.0;
            g.x0 = std::max(0, static_cast<int>(std::floor(p.mean2d.x() - radius)));
            g.x1 = std::min(intr.width, static_cast<int>(std::ceil(p.mean2d.x() + radius)) + 1);
            g.y0 = std::max(0, static_cast<int>(std::floor(p.mean2d.y() - radius)));
            g.y1 = std::min(intr.height, static_cast<int>(std::ceil(p.mean2d.y() + radius)) + 1);
        } else {
            g.x0 = 0;
            g.x1 = intr.width;
            g.y0 = 0;
            g.y1 = intr.height;
        }
        g.index = idx;
        if (g.x1 <= g.x0 || g.y1 <= g.y0) continue;
        ctx.ordered.push_back(g);
    }

    ctx.tiles_x = (intr.width + kTileSize - 1) / kTileSize;
    ctx.tiles_y = (intr.height + kTileSize - 1) / kTileSize;
    ctx.tiles.resize(static_cast<size_t>(ctx.tiles_x) * ctx.tiles_y);
    for (int oi = 0; oi < static_cast<int>(ctx.ordered.size()); ++oi) {
        const RasterGaussian& g = ctx.ordered[oi];
        const int tx0 = g.x0 / kTileSize, tx1 = (g.x1 - 1) / kTileSize;
        const int ty0 = g.y0 / kTileSize, ty1 = (g.y1 - 1) / kTileSize;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                ctx.tiles[static_cast<size_t>(ty) * ctx.tiles_x + tx].push_back(oi);
    }
    return ctx;
}

struct Contribution {
    int oi;        // index into ctx.ordered
    double alpha;
    double gexp;   // exp(power)
    double tview;  // transmittance before this contribution
    bool capped;
};

// Shared pixel walk; forward and backward replay the same inclusion rules.
template <typename Fn>
void composite_pixel(const Context& ctx, const std::vector<int>& tile, double px, double py,
                     const RenderOptions& opts, double& transmittance, Fn&& emit) {
    transmittance = 1.0;
    for (int oi : tile) {
        const RasterGaussian& g = ctx.ordered[oi];
        if (px < g.x0 || px >= g.x1 || py < g.y0 || py >= g.y1) continue;
        const double d0 = px + 0.5 - g.mean2d.x();
        const double d1 = py + 0.5 - g.mean2d.y();
        const double power =
            -0.5 * (g.inv00 * d0 * d0 + 2.0 * g.inv01 * d0 * d1 + g.inv11 * d1 * d1);
        if (opts.alpha_floor && power < kLogAlphaFloor) continue;
        const double gexp = std::exp(std::min(power, 0.0));
        const double raw = g.sigma * gexp;
        const bool capped = raw > kAlphaCap;
        const double alpha = capped ? kAlphaCap : raw;
        if (opts.alpha_floor && alpha < kAlphaFloor) continue;
        emit(Contribution{oi, alpha, gexp, transmittance, capped});
        transmittance *= 1.0 - alpha;
        if (opts.early_termination && transmittance < kTransmittanceCutoff) break;
    }
}

}  // namespace

void RenderGradients::resize(size_t n, int sh_coeffs) {
    d_position.assign(n, Vec3::Zero());
    d_rotation.assign(n, Vec4::Zero());
    d_log_scale.assign(n, Vec3::Zero());
    d_opacity_logit.assign(n, 0.0);
    d_sh.assign(n * sh_coeffs, 0.0);
    d_mean2d.assign(n, Vec2::Zero());
    d_pose_omega.setZero();
    d_pose_trans.setZero();
}

ProjectResult project(const GaussianCloud& cloud, const CameraPose& pose,
                      const CameraIntrinsics& intr) {
    validate_intrinsics(intr);
    const Mat3 w = pose.rotation();
    const Vec3 center = pose.camera_center();

    ProjectResult out;
    out.gaussians.resize(cloud.size());
    out.visible.assign(cloud.size(), 0);

    for (size_t i = 0; i < cloud.size(); ++i) {
        const Gaussian3D& g = cloud.gaussians[i];
        const Vec3 pc = w * g.position + pose.t;
        if (pc.z() <= kNearPlane) continue;

        ProjectedGaussian& p = out.gaussians[i];
        const double inv_z = 1.0 / pc.z();
        p.mean2d = Vec2(intr.fx * pc.x() * inv_z + intr.cx, intr.fy * pc.y() * inv_z + intr.cy);
        p.depth = pc.z();

        Mat23 jac;
        jac << intr.fx * inv_z, 0, -intr.fx * pc.x() * inv_z * inv_z,
            0, intr.fy * inv_z, -intr.fy * pc.y() * inv_z * inv_z;
        const Mat23 t = jac * w;
        const Mat3 sigma = build_covariance(g.rotation, g.scale());
        p.cov2d = t * sigma * t.transpose();
        p.cov2d(0, 0) += kLowPassFloor;
        p.cov2d(1, 1) += kLowPassFloor;

        Vec3 dir = g.position - center;
        const double dn = dir.norm();
        dir = dn > 1e-12 ? Vec3(dir / dn) : Vec3(0, 0, 1);
        p.color = eval_sh(g.sh, dir, cloud.sh_degree);
        p.alpha_peak = g.opacity();
        out.visible[i] = 1;
    }
    return out;
}

RenderOutput render(const GaussianCloud& cloud, const CameraPose& pose,
                    const CameraIntrinsics& intr, const RenderOptions& opts) {
    require(!cloud.empty(), "render: cloud is empty");
    const Context ctx = build_context(cloud, pose, intr, opts);

    RenderOutput out;
    out.color = ImageBuffer(intr.width, intr.height, 3);
    out.depth = DepthMap(intr.width, intr.height);
    out.accum_alpha = ImageBuffer(intr.width, intr.height, 1);

    parallel_chunks(static_cast<int>(ctx.tiles.size()), [&](int tile_idx) {
        const int tx = tile_idx % ctx.tiles_x, ty = tile_idx / ctx.tiles_x;
        const std::vector<int>& tile = ctx.tiles[tile_idx];
        const int x1 = std::min(intr.width, (tx + 1) * kTileSize);
        const int y1 = std::min(intr.height, (ty + 1) * kTileSize);
        for (int y = ty * kTileSize; y < y1; ++y) {
            for (int x = tx * kTileSize; x < x1; ++x) {
                Vec3 color = Vec3::Zero();
                double depth = 0;
                double t_final = 1.0;
                composite_pixel(ctx, tile, x, y, opts, t_final, [&](const Contribution& c) {
                    const RasterGaussian& g = ctx.ordered[c.oi];
                    const double w = c.alpha * c.tview;
                    color += w * g.color;
                    depth += w * g.depth;
                });
                color += t_final * opts.background;
                for (int ch = 0; ch < 3; ++ch) out.color.at(x, y, ch) = color[ch];
                out.depth.at(x, y) = depth;
                out.accum_alpha.at(x, y, 0) = 1.0 - t_final;
            }
        }
    });
    return out;
}

RenderGradients render_backward(const GaussianCloud& cloud, const CameraPose& pose,
                                const CameraIntrinsics& intr, const RenderUpstream& upstream,
                                const RenderOptions& opts) {
    require(!cloud.empty(), "render_backward: cloud is empty");
    const size_t n_pixels = static_cast<size_t>(intr.width) * intr.height;
    require(upstream.d_color.size() == 3 * n_pixels,
            "render_backward: d_color size mismatch");
    require(upstream.d_depth.empty() || upstream.d_depth.size() == n_pixels,
            "render_backward: d_depth size mismatch");
    for (double v : upstream.d_color)
        if (!std::isfinite(v)) throw_numeric("render_backward: non-finite upstream color gradient");
    for (double v : upstream.d_depth)
        if (!std::isfinite(v)) throw_numeric("render_backward: non-finite upstream depth gradient");

    const Context ctx = build_context(cloud, pose, intr, opts);
    const size_t n = cloud.size();
    const int sh_coeffs = cloud.sh_coeff_count();

    RenderGradients grads;
    grads.resize(n, sh_coeffs);

    // Phase A: screen-space gradients, accumulated per tile and reduced in
    // tile order so results do not depend on the worker count.
    struct ScreenGrad {
        Vec2 d_mean2d = Vec2::Zero();
        Mat2 d_inv = Mat2::Zero();  // w.r.t. the inverse 2D covariance
        double d_sigma = 0;
        Vec3 d_color = Vec3::Zero();
        double d_depth = 0;
    };
    const int n_tiles = static_cast<int>(ctx.tiles.size());
    std::vector<std::vector<ScreenGrad>> tile_grads(n_tiles);

    parallel_chunks(n_tiles, [&](int tile_idx) {
        if (ctx.tiles[tile_idx].empty()) return;
        std::vector<ScreenGrad> local(n);
        const int tx = tile_idx % ctx.tiles_x, ty = tile_idx / ctx.tiles_x;
        const std::vector<int>& tile = ctx.tiles[tile_idx];
        const int x1 = std::min(intr.width, (tx + 1) * kTileSize);
        const int y1 = std::min(intr.height, (ty + 1) * kTileSize);
        std::vector<Contribution> contribs;
        for (int y = ty * kTileSize; y < y1; ++y) {
            for (int x = tx * kTileSize; x < x1; ++x) {
                const size_t pix = static_cast<size_t>(y) * intr.width + x;
                const Vec3 u_color(upstream.d_color[3 * pix], upstream.d_color[3 * pix + 1],
                                   upstream.d_color[3 * pix + 2]);
                const double u_depth = upstream.d_depth.empty() ? 0.0 : upstream.d_depth[pix];
                if (u_color.isZero() && u_depth == 0.0) continue;

                contribs.clear();
                double t_final = 1.0;
                composite_pixel(ctx, tile, x, y, opts, t_final,
                                [&](const Contribution& c) { contribs.push_back(c); });

                // Suffix accumulators over contributions behind the current one.
                Vec3 suffix_color = Vec3::Zero();
                double suffix_depth = 0;
                for (int i = static_cast<int>(contribs.size()) - 1; i >= 0; --i) {
                    const Contribution& c = contribs[i];
                    const RasterGaussian& g = ctx.ordered[c.oi];
                    ScreenGrad& sg = local[g.index];

                    const double w = c.alpha * c.tview;
                    sg.d_color += w * u_color;
                    sg.d_depth += w * u_depth;

                    const double one_minus = 1.0 - c.alpha;
                    const double d_color_d_alpha =
                        u_color.dot(g.color * c.tview - (suffix_color + t_final * opts.background) / one_minus);
                    const double d_depth_d_alpha =
                        u_depth * (g.depth * c.tview - suffix_depth / one_minus);
                    const double d_alpha = d_color_d_alpha + d_depth_d_alpha;

                    suffix_color += w * g.color;
                    suffix_depth += w * g.depth;

                    if (c.capped) continue;  // flat at the alpha cap
                    sg.d_sigma += d_alpha * c.gexp;
                    const double d_power = d_alpha * g.sigma * c.gexp;
                    const double d0 = x + 0.5 - g.mean2d.x();
                    const double d1 = y + 0.5 - g.mean2d.y();
                    // power = -1/2 d^T Inv d with d = pixel - mean2d
                    sg.d_mean2d.x() += d_power * (g.inv00 * d0 + g.inv01 * d1);
                    sg.d_mean2d.y() += d_power * (g.inv01 * d0 + g.inv11 * d1);
                    sg.d_inv(0, 0) += d_power * (-0.5 * d0 * d0);
                    sg.d_inv(0, 1) += d_power * (-0.5 * d0 * d1);
                    sg.d_inv(1, 0) += d_power * (-0.5 * d1 * d0);
                    sg.d_inv(1, 1) += d_power * (-0.5 * d1 * d1);
                }
            }
        }
        tile_grads[tile_idx] = std::move(local);
    });

    std::vector<ScreenGrad> screen(n);
    for (int t = 0; t < n_tiles; ++t) {
        if (tile_grads[t].empty()) continue;
        for (size_t i = 0; i < n; ++i) {
            screen[i].d_mean2d += tile_grads[t][i].d_mean2d;
            screen[i].d_inv += tile_grads[t][i].d_inv;
            screen[i].d_sigma += tile_grads[t][i].d_sigma;
            screen[i].d_color += tile_grads[t][i].d_color;
            screen[i].d_depth += tile_grads[t][i].d_depth;
        }
    }

    // Phase B: chain screen-space gradients to Gaussian parameters and pose.
    const Mat3 w_rot = pose.rotation();
    const Vec3 cam_center = pose.camera_center();
    Mat3 d_rot_pose = Mat3::Zero();
    Vec3 d_t_pose = Vec3::Zero();

    for (size_t i = 0; i < n; ++i) {
        if (!ctx.proj.visible[i]) continue;
        const ScreenGrad& sg = screen[i];
        grads.d_mean2d[i] = sg.d_mean2d;
        const Gaussian3D& g = cloud.gaussians[i];
        const ProjectedGaussian& p = ctx.proj.gaussians[i];

        // Inverse covariance -> covariance (low-pass floor shifts, no scaling).
        const double det = p.cov2d(0, 0) * p.cov2d(1, 1) - p.cov2d(0, 1) * p.cov2d(1, 0);
        Mat2 inv;
        inv << p.cov2d(1, 1) / det, -p.cov2d(0, 1) / det, -p.cov2d(1, 0) / det, p.cov2d(0, 0) / det;
        const Mat2 d_cov2d = -inv * sg.d_inv * inv;

        const Vec3 pc = w_rot * g.position + pose.t;
        const double inv_z = 1.0 / pc.z();
        Mat23 jac;
        jac << intr.fx * inv_z, 0, -intr.fx * pc.x() * inv_z * inv_z,
            0, intr.fy * inv_z, -intr.fy * pc.y() * inv_z * inv_z;
        const Mat23 t_mat = jac * w_rot;
        const Vec4 q_unit = quat_normalized(g.rotation);
        const Mat3 rot_g = quat_to_rot(q_unit);
        const Vec3 scale = g.scale();
        const Mat3 m3 = rot_g * scale.asDiagonal();
        const Mat3 sigma3 = m3 * m3.transpose();

        // cov2d = T Sigma T^T
        const Mat3 d_sigma3 = t_mat.transpose() * d_cov2d * t_mat;
        const Mat23 d_t_mat = (d_cov2d + d_cov2d.transpose()) * t_mat * sigma3;
        const Mat23 d_jac = d_t_mat * w_rot.transpose();
        d_rot_pose += jac.transpose() * d_t_mat;

        // Sigma = M3 M3^T, M3 = R diag(s)
        const Mat3 d_m3 = (d_sigma3 + d_sigma3.transpose()) * m3;
        const Mat3 d_rot_g = d_m3 * scale.asDiagonal();
        Vec3 d_scale;
        for (int k = 0; k < 3; ++k) d_scale[k] = rot_g.col(k).dot(d_m3.col(k));

        Mat3 dr[4];
        quat_to_rot_jacobian(q_unit, dr);
        Vec4 d_q_unit;
        for (int k = 0; k < 4; ++k) d_q_unit[k] = (d_rot_g.array() * dr[k].array()).sum();
        grads.d_rotation[i] = quat_normalize_jacobian(g.rotation).transpose() * d_q_unit;
        grads.d_log_scale[i] = d_scale.cwiseProduct(scale);

        // Camera-space position gradient: projection + Jacobian + depth terms.
        Vec3 d_pc = Vec3::Zero();
        d_pc.x() += sg.d_mean2d.x() * intr.fx * inv_z;
        d_pc.y() += sg.d_mean2d.y() * intr.fy * inv_z;
        d_pc.z() += -sg.d_mean2d.x() * intr.fx * pc.x() * inv_z * inv_z -
                    sg.d_mean2d.y() * intr.fy * pc.y() * inv_z * inv_z;
        d_pc.x() += d_jac(0, 2) * (-intr.fx * inv_z * inv_z);
        d_pc.y() += d_jac(1, 2) * (-intr.fy * inv_z * inv_z);
        d_pc.z() += d_jac(0, 0) * (-intr.fx * inv_z * inv_z) +
                    d_jac(1, 1) * (-intr.fy * inv_z * inv_z) +
                    d_jac(0, 2) * (2.0 * intr.fx * pc.x() * inv_z * inv_z * inv_z) +
                    d_jac(1, 2) * (2.0 * intr.fy * pc.y() * inv_z * inv_z * inv_z);
        d_pc.z() += sg.d_depth;

        // Color: SH coefficients and, through the view direction, position.
        Vec3 d_dir = Vec3::Zero();
        std::span<double> dsh(grads.d_sh.data() + i * sh_coeffs, sh_coeffs);
        Vec3 dir_raw = g.position - cam_center;
        const double dn = dir_raw.norm();
        const Vec3 dir = dn > 1e-12 ? Vec3(dir_raw / dn) : Vec3(0, 0, 1);
        eval_sh_backward(g.sh, dir, cloud.sh_degree, sg.d_color, dsh, d_dir);
        Vec3 d_dir_raw = Vec3::Zero();
        if (dn > 1e-12) d_dir_raw = (Mat3::Identity() - dir * dir.transpose()) * d_dir / dn;

        grads.d_opacity_logit[i] = sg.d_sigma * p.alpha_peak * (1.0 - p.alpha_peak);
        grads.d_position[i] = w_rot.transpose() * d_pc + d_dir_raw;

        d_rot_pose += d_pc * g.position.transpose();
        d_t_pose += d_pc;
        // camera center = -R^T t feeds the view direction; d(center) = -d_dir_raw
        d_rot_pose += pose.t * d_dir_raw.transpose();
        d_t_pose += w_rot * d_dir_raw;
    }

    // Tangent-space pose gradient for the left perturbation.
    for (int k = 0; k < 3; ++k) {
        const Mat3 gen = skew(Vec3::Unit(k));
        grads.d_pose_omega[k] =
            (d_rot_pose.array() * (gen * w_rot).array()).sum() + d_t_pose.dot(gen * pose.t);
    }
    grads.d_pose_trans = d_t_pose;
    return grads;
}

}  // namespace bs
