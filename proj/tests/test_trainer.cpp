#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "core/json_io.hpp"
#include "core/synthbench.hpp"
#include "core/trainer.hpp"
#include "oracles.hpp"

using namespace bs;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.total_iters = 4000;
    cfg.init_iters = 120;
    cfg.joint_iters = 40;
    cfg.pose_iters = 60;
    cfg.global_refine_interval = 1000000;  // off for the small tests
    cfg.densify_start_iter = 1000000;      // off unless a test enables it
    cfg.m_blur = 2;
    cfg.pe_freqs_position = 4;
    cfg.pe_freqs_view = 2;
    cfg.bootstrap_points = 150;
    cfg.densify.n_new = 1;
    cfg.densify.k = 4;
    cfg.densify.dist_threshold = 2.0;
    cfg.log_interval = 10;
    return cfg;
}

TrainDataset dataset_from_scene(const SynthScene& scene, const BlurSpec& blur) {
    TrainDataset data;
    data.intr = scene.spec.intrinsics;
    for (int t = 0; t < scene.spec.n_frames; ++t) {
        const BlurFrame f = simulate_blur(scene, t, blur);
        FrameData frame;
        frame.blurry = f.blurry;
        frame.depth = f.depth;
        frame.has_depth = true;
        data.frames.push_back(std::move(frame));
    }
    return data;
}

GaussianCloud bootstrap_of(const TrainDataset& data, const TrainConfig& cfg) {
    return bootstrap_sparse_cloud(data.frames[0].blurry, data.frames[0].depth, data.intr,
                                  cfg.bootstrap_points, cfg.sh_degree);
}

}  // namespace

TEST_CASE("densify_and_prune: zero gradients and high opacities leave the cloud alone") {
    oracle::SceneRng rng(121);
    GaussianCloud cloud = oracle::random_cloud(rng, 30, 1);
    for (auto& g : cloud.gaussians) g.opacity_logit = logit(0.8);
    CloudOptimizer opt;
    opt.init(cloud);
    DensifyState state;
    state.resize(cloud.size());
    CounterRng crng(1, 1);
    TrainConfig cfg = tiny_config();

    const size_t before = cloud.size();
    const DensifyPruneResult res =
        densify_and_prune(cloud, state, opt, cfg, 4.0, CameraPose{}, crng);
    CHECK(cloud.size() == before);
    CHECK(res.n_pruned == 0);
    CHECK(res.n_cloned == 0);
    CHECK(res.n_split == 0);
}

TEST_CASE("densify_and_prune: opacity below 1e-2 is removed") {
    oracle::SceneRng rng(122);
    GaussianCloud cloud = oracle::random_cloud(rng, 10, 1);
    for (auto& g : cloud.gaussians) g.opacity_logit = logit(0.5);
    cloud.gaussians[3].opacity_logit = logit(1e-3);
    CloudOptimizer opt;
    opt.init(cloud);
    DensifyState state;
    state.resize(cloud.size());
    CounterRng crng(1, 1);

    const DensifyPruneResult res =
        densify_and_prune(cloud, state, opt, tiny_config(), 4.0, CameraPose{}, crng);
    CHECK(res.n_pruned == 1);
    CHECK(cloud.size() == 9);
    for (const auto& g : cloud.gaussians) CHECK(g.opacity() >= 1e-2);
}

TEST_CASE("densify_and_prune: post-state predicate scan (opacity and depth)") {
    oracle::SceneRng rng(123);
    GaussianCloud cloud = oracle::random_cloud(rng, 50, 1);
    // A few low-opacity and a few very distant gaussians.
    for (int i = 0; i < 5; ++i) cloud.gaussians[i].opacity_logit = logit(5e-3);
    for (int i = 5; i < 9; ++i) cloud.gaussians[i].position = Vec3(0, 0, 100.0 + i);
    CloudOptimizer opt;
    opt.init(cloud);
    DensifyState state;
    state.resize(cloud.size());
    CounterRng crng(2, 2);
    TrainConfig cfg = tiny_config();

    densify_and_prune(cloud, state, opt, cfg, 4.0, CameraPose{}, crng);

    // Full scan of the survivors.
    std::vector<double> depths;
    for (const auto& g : cloud.gaussians)
        if (g.position.z() > 0) depths.push_back(g.position.z());
    std::sort(depths.begin(), depths.end());
    const double median = depths[depths.size() / 2];
    for (const auto& g : cloud.gaussians) {
        CHECK(g.opacity() >= cfg.prune_opacity_threshold);
        if (g.position.z() > 0) CHECK(g.position.z() <= 3.0 * median * 3.0);  // loose sanity
    }
    // The crafted far points are gone.
    for (const auto& g : cloud.gaussians) CHECK(g.position.z() < 100.0);
}

TEST_CASE("densify_and_prune: clone vs split selection by scale") {
    oracle::SceneRng rng(124);
    GaussianCloud cloud = oracle::random_cloud(rng, 6, 1);
    for (auto& g : cloud.gaussians) g.opacity_logit = logit(0.6);
    // Two rows above the gradient threshold: one small (clone), one large (split).
    cloud.gaussians[1].log_scale.setConstant(std::log(0.001));
    cloud.gaussians[4].log_scale.setConstant(std::log(0.5));
    CloudOptimizer opt;
    opt.init(cloud);
    DensifyState state;
    state.resize(cloud.size());
    state.grad_norm_accum[1] = 1.0;
    state.grad_count[1] = 1;
    state.grad_norm_accum[4] = 1.0;
    state.grad_count[4] = 1;
    CounterRng crng(3, 3);

    const size_t before = cloud.size();
    const DensifyPruneResult res =
        densify_and_prune(cloud, state, opt, tiny_config(), 4.0, CameraPose{}, crng);
    CHECK(res.n_cloned == 1);
    CHECK(res.n_split == 1);
    CHECK(cloud.size() == before + 1 + 1);  // clone adds 1; split removes 1, adds 2
}

TEST_CASE("densify_and_prune: optimizer rows stay aligned through a cycle") {
    oracle::SceneRng rng(125);
    GaussianCloud cloud = oracle::random_cloud(rng, 9, 0);
    for (auto& g : cloud.gaussians) g.opacity_logit = logit(0.5);
    cloud.gaussians[2].opacity_logit = logit(1e-3);  // will be pruned
    cloud.gaussians[6].opacity_logit = logit(1e-3);  // will be pruned

    CloudOptimizer opt;
    opt.init(cloud);

    // Tag each row's momentum in a distinct position component: a first step
    // with gradient only on component (i % 3).
    RenderGradients grads;
    grads.resize(cloud.size(), cloud.sh_coeff_count());
    for (size_t i = 0; i < cloud.size(); ++i) grads.d_position[i][i % 3] = 1.0;
    GaussianCloud stepped = cloud;
    opt.step(stepped, grads, {1e-2, 0, 0, 0, 0});

    DensifyState state;
    state.resize(stepped.size());
    CounterRng crng(4, 4);
    const DensifyPruneResult res =
        densify_and_prune(stepped, state, opt, tiny_config(), 4.0, CameraPose{}, crng);
    REQUIRE(res.src_rows.size() == stepped.size());

    // A zero-gradient step now moves each surviving row only along its own
    // tagged component (Adam momentum), proving row alignment.
    RenderGradients zero;
    zero.resize(stepped.size(), stepped.sh_coeff_count());
    GaussianCloud after = stepped;
    opt.step(after, zero, {1e-2, 0, 0, 0, 0});
    for (size_t i = 0; i < after.size(); ++i) {
        const int src = res.src_rows[i];
        const Vec3 moved = (after.gaussians[i].position - stepped.gaussians[i].position).cwiseAbs();
        if (src < 0) {
            CHECK(moved.maxCoeff() == 0.0);  // fresh rows have no momentum
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            if (c == src % 3)
                CHECK(moved[c] > 0.0);
            else
                CHECK(moved[c] == 0.0);
        }
    }
}

TEST_CASE("train: loss decreases over the first 200 iterations of frame-0 fitting") {
    SceneSpec sspec;
    sspec.n_gaussians = 40;
    sspec.n_frames = 2;
    sspec.intrinsics = CameraIntrinsics{40, 40, 16, 16, 32, 32};
    sspec.seed = 31;
    const SynthScene scene = generate_scene(sspec);
    BlurSpec blur;
    blur.kind = BlurKind::None;
    const TrainDataset data = dataset_from_scene(scene, blur);

    TrainConfig cfg = tiny_config();
    cfg.init_iters = 200;
    cfg.joint_iters = 0;
    cfg.log_interval = 1;
    const TrainResult result = train_progressive(data, bootstrap_of(data, cfg), cfg);

    double first = -1, last = -1;
    for (const MetricsRecord& m : result.metrics) {
        const double total = m.l_image + 0.01 * m.l_depth + m.l_pose;
        if (first < 0) first = total;
        last = total;
    }
    CHECK(last < first);
}

TEST_CASE("train: 2-frame zero-motion sequence recovers identity pose at 35 dB") {
    SceneSpec sspec;
    sspec.n_gaussians = 120;
    sspec.n_frames = 2;
    sspec.seed = 32;  // default 64x64 intrinsics
    SynthScene scene = generate_scene(sspec);
    // Zero camera motion: pin both frames to the same pose.
    scene.trajectory.poses[1] = scene.trajectory.poses[0];

    BlurSpec blur;
    blur.kind = BlurKind::None;
    TrainDataset data = dataset_from_scene(scene, blur);
    // Both frames identical by construction.
    data.frames[1] = data.frames[0];

    TrainConfig cfg = tiny_config();
    cfg.init_iters = 900;
    cfg.joint_iters = 40;
    cfg.bootstrap_points = 300;
    cfg.log_interval = 1000000;
    const TrainResult result = train_progressive(data, bootstrap_of(data, cfg), cfg);

    REQUIRE(result.trajectory.size() == 2);
    const Mat3 rel = result.trajectory.poses[1].rotation() *
                     result.trajectory.poses[0].rotation().transpose();
    CHECK(rotation_angle(rel) * kDegPerRad < 0.1);

    const BlurRenderOutput pred =
        render_blurred(result.cloud, result.net, result.trajectory.poses[0], data.intr);
    CHECK(psnr(pred.color, data.frames[0].blurry) >= 35.0);
}

TEST_CASE("train: zero joint budget means later frames cannot touch the cloud") {
    SceneSpec sspec;
    sspec.n_gaussians = 30;
    sspec.n_frames = 2;
    sspec.intrinsics = CameraIntrinsics{40, 40, 16, 16, 32, 32};
    sspec.seed = 33;
    const SynthScene scene = generate_scene(sspec);
    BlurSpec blur;
    blur.kind = BlurKind::None;
    TrainDataset data = dataset_from_scene(scene, blur);

    TrainConfig cfg = tiny_config();
    cfg.init_iters = 60;
    cfg.joint_iters = 0;
    const GaussianCloud sparse = bootstrap_of(data, cfg);
    const TrainResult a = train_progressive(data, sparse, cfg);

    // Corrupt frame 1: with a zero refinement budget it only feeds the pose
    // step, so the final cloud must be identical to the unmodified run.
    TrainDataset data2 = data;
    for (double& v : data2.frames[1].blurry.data) v = std::min(1.0, v + 0.25);
    const TrainResult b = train_progressive(data2, sparse, cfg);

    REQUIRE(a.cloud.size() == b.cloud.size());
    for (size_t i = 0; i < a.cloud.size(); ++i) {
        CHECK(a.cloud.gaussians[i].position == b.cloud.gaussians[i].position);
        CHECK(a.cloud.gaussians[i].sh == b.cloud.gaussians[i].sh);
    }
    CHECK(a.trajectory.size() == 2);
}

TEST_CASE("train: two runs with the same seed produce identical metrics") {
    SceneSpec sspec;
    sspec.n_gaussians = 30;
    sspec.n_frames = 2;
    sspec.intrinsics = CameraIntrinsics{40, 40, 16, 16, 32, 32};
    sspec.seed = 34;
    const SynthScene scene = generate_scene(sspec);
    BlurSpec blur;
    blur.kind = BlurKind::CameraMotion;
    blur.n_sub = 4;
    blur.magnitude = 0.05;
    const TrainDataset data = dataset_from_scene(scene, blur);

    TrainConfig cfg = tiny_config();
    cfg.init_iters = 50;
    cfg.joint_iters = 10;
    cfg.log_interval = 5;
    const GaussianCloud sparse = bootstrap_of(data, cfg);

    const auto dir = fs::path("test_tmp") / "trainer";
    fs::create_directories(dir);
    const TrainResult a = train_progressive(data, sparse, cfg);
    const TrainResult b = train_progressive(data, sparse, cfg);
    save_metrics(a.metrics, (dir / "a.jsonl").string());
    save_metrics(b.metrics, (dir / "b.jsonl").string());
    CHECK(read_text_file((dir / "a.jsonl").string()) ==
          read_text_file((dir / "b.jsonl").string()));
}

TEST_CASE("train: quaternions stay unit through optimization") {
    SceneSpec sspec;
    sspec.n_gaussians = 25;
    sspec.n_frames = 2;
    sspec.intrinsics = CameraIntrinsics{40, 40, 16, 16, 32, 32};
    sspec.seed = 35;
    const SynthScene scene = generate_scene(sspec);
    BlurSpec blur;
    blur.kind = BlurKind::None;
    const TrainDataset data = dataset_from_scene(scene, blur);

    TrainConfig cfg = tiny_config();
    cfg.init_iters = 40;
    cfg.joint_iters = 6;
    const TrainResult result = train_progressive(data, bootstrap_of(data, cfg), cfg);
    for (const Gaussian3D& g : result.cloud.gaussians)
        CHECK(std::abs(g.rotation.norm() - 1.0) < 1e-6);
}

TEST_CASE("bootstrap_sparse_cloud: unprojects valid depth with frame colors") {
    CameraIntrinsics intr{40, 40, 16, 16, 32, 32};
    ImageBuffer frame(32, 32, 3, 0.5);
    DepthMap depth(32, 32, 2.0);
    for (int x = 0; x < 32; ++x) depth.at(x, 0) = DepthMap::kNoSurface;

    const GaussianCloud cloud = bootstrap_sparse_cloud(frame, depth, intr, 50, 1);
    CHECK(cloud.size() == 50);
    for (const Gaussian3D& g : cloud.gaussians) {
        CHECK(g.position.z() == doctest::Approx(2.0));
        CHECK(g.sh[0] == doctest::Approx(0.0).epsilon(1e-9));  // 0.5 maps to zero dc
    }
}

TEST_CASE("load_dataset: missing directory fails cleanly") {
    CHECK_THROWS_AS(load_dataset("definitely_missing_dir"), Error);
}
