#include "core/synthbench.hpp"

#include <cmath>
#include <filesystem>

#include "core/error.hpp"
#include "core/image_io.hpp"
#include "core/json_io.hpp"
#include "core/ply.hpp"
#include "core/rng.hpp"
#include "core/sh.hpp"

namespace bs {

namespace fs = std::filesystem;

BlurKind blur_kind_from_string(const std::string& name) {
    if (name == "none") return BlurKind::None;
    if (name == "camera_motion") return BlurKind::CameraMotion;
    if (name == "object_motion") return BlurKind::ObjectMotion;
    if (name == "defocus") return BlurKind::Defocus;
    throw_invalid("unknown blur kind '" + name + "'");
}

std::string to_string(BlurKind kind) {
    switch (kind) {
        case BlurKind::None: return "none";
        case BlurKind::CameraMotion: return "camera_motion";
        case BlurKind::ObjectMotion: return "object_motion";
        case BlurKind::Defocus: return "defocus";
    }
    return "none";
}

Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double t) {
    const double t2 = t * t, t3 = t2 * t;
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

Vec3 spline_eval(const std::vector<Vec3>& points, double s) {
    require(points.size() >= 2, "spline_eval: need at least 2 points");
    const int last = static_cast<int>(points.size()) - 1;
    s = std::clamp(s, 0.0, static_cast<double>(last));
    int seg = std::min(static_cast<int>(s), last - 1);
    const double t = s - seg;
    const auto at = [&](int i) { return points[std::clamp(i, 0, last)]; };
    return catmull_rom(at(seg - 1), at(seg), at(seg + 1), at(seg + 2), t);
}

namespace {

CameraPose look_at(const Vec3& eye, const Vec3& target) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 up(0, 1, 0);
    if (std::abs(forward.dot(up)) > 0.99) up = Vec3(1, 0, 0);
    const Vec3 right = up.cross(forward).normalized();
    const Vec3 cam_up = forward.cross(right);
    Mat3 r_cw;
    r_cw.row(0) = right;
    r_cw.row(1) = cam_up;
    r_cw.row(2) = forward;
    CameraPose pose;
    pose.q = rot_to_quat(r_cw);
    pose.t = -(r_cw * eye);
    return pose;
}

// The aim point follows only a fraction of the camera's lateral motion. A
// full look-at re-aims at the scene every sample, which cancels almost all
// apparent image motion and would make both the blur and the pose signal
// vanish for an orbit-like path.
constexpr double kAimFollow = 0.3;

// Handheld-style rotational wobble layered on the dolly path. Rotation moves
// the whole image regardless of depth, so it dominates the visible motion
// blur the way shake does in long exposures.
constexpr double kWobbleAmp = 0.08;   // radians
constexpr double kWobbleYawCycles = 1.5;
constexpr double kWobblePitchCycles = 1.05;

constexpr double kCameraRadiusFactor = 1.2;  // x extent
constexpr double kPathSpan = 0.23;           // radians of the waypoint arc

constexpr int kArcSamplesPerFrame = 64;

std::vector<double> arc_table(const SynthScene& scene) {
    const int n = (scene.spec.n_frames - 1) * kArcSamplesPerFrame + 1;
    std::vector<double> cum(n, 0.0);
    Vec3 prev = scene.pose_at(0.0).camera_center();
    for (int i = 1; i < n; ++i) {
        const double u = static_cast<double>(i) / kArcSamplesPerFrame;
        const Vec3 cur = scene.pose_at(u).camera_center();
        cum[i] = cum[i - 1] + (cur - prev).norm();
        prev = cur;
    }
    return cum;
}

}  // namespace

CameraPose SynthScene::pose_at(double u) const {
    const double span = static_cast<double>(static_cast<int>(waypoints.size()) - 1);
    const double denom = std::max(1, spec.n_frames - 1);
    const Vec3 eye = spline_eval(waypoints, u / denom * span);
    CameraPose pose = look_at(eye, Vec3(kAimFollow * eye.x(), kAimFollow * eye.y(), 0.0));

    const double phase = u / denom * 2.0 * M_PI;
    const double yaw = kWobbleAmp * std::sin(kWobbleYawCycles * phase);
    const double pitch = kWobbleAmp * std::cos(kWobblePitchCycles * phase + 0.7);
    const Mat3 wobble = so3_exp(Vec3(pitch, yaw, 0));
    const Mat3 r_cw = wobble * pose.rotation();
    pose.q = rot_to_quat(r_cw);
    pose.t = -(r_cw * eye);
    return pose;
}

GaussianCloud SynthScene::cloud_at(double u, double sub_exposure_shift) const {
    GaussianCloud out = cloud;
    for (size_t i = 0; i < out.gaussians.size(); ++i) {
        if (velocities[i].isZero()) continue;
        const Vec3 dir = velocities[i].normalized();
        out.gaussians[i].position += velocities[i] * u + dir * sub_exposure_shift;
    }
    return out;
}

double SynthScene::arc_length() const { return arc_table(*this).back(); }

double SynthScene::param_at_arc(double s) const {
    const std::vector<double> cum = arc_table(*this);
    s = std::clamp(s, 0.0, cum.back());
    const auto it = std::lower_bound(cum.begin(), cum.end(), s);
    const int hi = static_cast<int>(it - cum.begin());
    if (hi == 0) return 0.0;
    const double seg = cum[hi] - cum[hi - 1];
    const double frac = seg > 1e-12 ? (s - cum[hi - 1]) / seg : 0.0;
    return (hi - 1 + frac) / kArcSamplesPerFrame;
}

SynthScene generate_scene(const SceneSpec& spec) {
    require(spec.n_gaussians >= 1, "generate_scene: need at least one Gaussian");
    require(spec.n_frames >= 1, "generate_scene: need at least one frame");
    require(spec.extent > 0, "generate_scene: extent must be positive");
    validate_intrinsics(spec.intrinsics);

    SynthScene scene;
    scene.spec = spec;
    scene.cloud.sh_degree = spec.sh_degree;
    const int sh_coeffs = sh_coeffs_for_degree(spec.sh_degree);
    const double half = spec.extent / 2.0;

    CounterRng rng(spec.seed, 0);
    scene.cloud.gaussians.resize(spec.n_gaussians);
    for (Gaussian3D& g : scene.cloud.gaussians) {
        for (int c = 0; c < 3; ++c) g.position[c] = rng.uniform(-half, half);
        Vec4 q;
        for (int c = 0; c < 4; ++c) q[c] = rng.normal();
        g.rotation = quat_normalized(q.norm() > 1e-9 ? q : Vec4(1, 0, 0, 0));
        for (int c = 0; c < 3; ++c)
            g.log_scale[c] = std::log(spec.extent * rng.uniform(0.015, 0.045));
        g.opacity_logit = logit(rng.uniform(0.6, 0.95));
        g.sh.assign(sh_coeffs, 0.0);
        for (int c = 0; c < 3; ++c) g.sh[c] = (rng.uniform(0.1, 0.9) - 0.5) / kSH0;
        for (int k = 3; k < sh_coeffs; ++k) g.sh[k] = rng.uniform(-0.08, 0.08);
    }

    // Camera-center path: jittered arc around the scene, spline-interpolated.
    CounterRng way_rng(spec.seed, 1);
    const int n_waypoints = 6;
    const double radius = kCameraRadiusFactor * spec.extent;
    for (int i = 0; i < n_waypoints; ++i) {
        const double theta = -kPathSpan / 2 + kPathSpan * i / (n_waypoints - 1);
        const double r = radius + spec.extent * way_rng.uniform(-0.04, 0.04);
        const double y = 0.25 * spec.extent + spec.extent * way_rng.uniform(-0.04, 0.04);
        scene.waypoints.emplace_back(r * std::sin(theta), y, -r * std::cos(theta));
    }

    CounterRng vel_rng(spec.seed, 2);
    scene.velocities.assign(spec.n_gaussians, Vec3::Zero());
    const int n_moving = static_cast<int>(std::lround(spec.moving_fraction * spec.n_gaussians));
    for (int i = 0; i < n_moving; ++i) {
        Vec3 dir(vel_rng.normal(), vel_rng.normal(), vel_rng.normal());
        if (dir.norm() < 1e-9) dir = Vec3(1, 0, 0);
        scene.velocities[i] = dir.normalized() * (0.01 * spec.extent);
    }

    for (int t = 0; t < spec.n_frames; ++t) {
        scene.trajectory.poses.push_back(scene.pose_at(t));
        scene.trajectory.frame_ids.push_back(t);
    }
    return scene;
}

namespace {

ImageBuffer gaussian_convolve(const ImageBuffer& img, double sigma) {
    if (sigma <= 0) return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    // Separable passes with per-pixel renormalization at the borders, so a
    // constant image stays constant.
    ImageBuffer tmp(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0, wsum = 0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xi = x + i;
                    if (xi < 0 || xi >= img.width) continue;
                    acc += kernel[i + radius] * img.at(xi, y, c);
                    wsum += kernel[i + radius];
                }
                tmp.at(x, y, c) = acc / wsum;
            }
    ImageBuffer out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0, wsum = 0;
                for (int j = -radius; j <= radius; ++j) {
                    const int yj = y + j;
                    if (yj < 0 || yj >= img.height) continue;
                    acc += kernel[j + radius] * tmp.at(x, yj, c);
                    wsum += kernel[j + radius];
                }
                out.at(x, y, c) = acc / wsum;
            }
    return out;
}

}  // namespace

BlurFrame simulate_blur(const SynthScene& scene, int frame, const BlurSpec& spec,
                        const RenderOptions& opts) {
    require(frame >= 0 && frame < scene.spec.n_frames, "simulate_blur: frame out of range");
    require(spec.n_sub >= 1, "simulate_blur: n_sub must be >= 1");
    require(spec.magnitude >= 0, "simulate_blur: magnitude must be >= 0");
    const bool motion = spec.kind == BlurKind::CameraMotion || spec.kind == BlurKind::ObjectMotion;
    if (motion && spec.magnitude > 0)
        require(spec.n_sub >= 2, "simulate_blur: motion blur needs n_sub >= 2");

    const CameraIntrinsics& intr = scene.spec.intrinsics;
    const CameraPose mid_pose = scene.trajectory.poses[frame];
    const GaussianCloud mid_cloud = scene.cloud_at(frame);

    BlurFrame out;
    const RenderOutput sharp = render(mid_cloud, mid_pose, intr, opts);
    out.sharp = sharp.color;
    // Surface-style depth: the composite is alpha-weighted, so divide the
    // accumulated opacity back out; thin coverage becomes "no surface".
    out.depth = DepthMap(intr.width, intr.height);
    for (size_t i = 0; i < out.depth.data.size(); ++i) {
        const double accum = sharp.accum_alpha.data[i];
        out.depth.data[i] = accum > 0.1 ? sharp.depth.data[i] / accum : DepthMap::kNoSurface;
    }

    const auto average_renders = [&](auto&& render_sub) {
        ImageBuffer acc(intr.width, intr.height, 3);
        for (int k = 0; k < spec.n_sub; ++k) {
            const ImageBuffer img = render_sub(k);
            for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += img.data[i];
        }
        for (double& v : acc.data) v /= spec.n_sub;
        return acc;
    };

    switch (spec.kind) {
        case BlurKind::None:
            out.blurry = out.sharp;
            break;
        case BlurKind::CameraMotion: {
            if (spec.magnitude == 0) {
                out.blurry = out.sharp;
                break;
            }
            const std::vector<double> cum = arc_table(scene);
            const double s_mid =
                cum[std::min<size_t>(static_cast<size_t>(frame) * kArcSamplesPerFrame,
                                     cum.size() - 1)];
            out.blurry = average_renders([&](int k) {
                const double offset = spec.magnitude * ((k + 0.5) / spec.n_sub - 0.5);
                const CameraPose pose = scene.pose_at(scene.param_at_arc(s_mid + offset));
                return render(mid_cloud, pose, intr, opts).color;
            });
            break;
        }
        case BlurKind::ObjectMotion: {
            if (spec.magnitude == 0) {
                out.blurry = out.sharp;
                break;
            }
            out.blurry = average_renders([&](int k) {
                const double shift = spec.magnitude * ((k + 0.5) / spec.n_sub - 0.5);
                return render(scene.cloud_at(frame, shift), mid_pose, intr, opts).color;
            });
            break;
        }
        case BlurKind::Defocus:
            out.blurry = gaussian_convolve(out.sharp, spec.magnitude);
            break;
    }
    return out;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    require(a.same_shape(b), "psnr: image shapes differ");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double e = a.data[i] - b.data[i];
        mse += e * e;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

void write_dataset(const SynthScene& scene, const BlurSpec& blur, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "frames");
    fs::create_directories(fs::path(out_dir) / "sharp");
    fs::create_directories(fs::path(out_dir) / "depth");

    char name[32];
    for (int t = 0; t < scene.spec.n_frames; ++t) {
        const BlurFrame frame = simulate_blur(scene, t, blur);
        std::snprintf(name, sizeof(name), "%05d.png", t);
        save_png(frame.blurry, (fs::path(out_dir) / "frames" / name).string());
        save_png(frame.sharp, (fs::path(out_dir) / "sharp" / name).string());
        std::snprintf(name, sizeof(name), "%05d.pfm", t);
        save_pfm(frame.depth, (fs::path(out_dir) / "depth" / name).string());
    }
    save_intrinsics_json(scene.spec.intrinsics, (fs::path(out_dir) / "intr.json").string());
    save_trajectory(scene.trajectory, (fs::path(out_dir) / "gt_poses.jsonl").string());
    save_ply(scene.cloud, (fs::path(out_dir) / "gt_cloud.ply").string(),
             {std::string("generator=blursplat"), std::string("rng=") + kRngAlgorithm});
}

}  // namespace bs
