#include "core/config.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/image_io.hpp"
#include "core/json_io.hpp"
#include "core/parallel.hpp"
#include "core/ply.hpp"
#include "core/rng.hpp"
#include "core/ssim.hpp"

namespace bs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Typed setters keyed by name; parsing fails loudly on unknown keys.
struct Schema {
    std::map<std::string, std::function<void(const std::string&)>> setters;

    void apply(const KeyValues& kv) const {
        for (const auto& [key, value] : kv.items) {
            const auto it = setters.find(key);
            if (it == setters.end()) throw_invalid("unknown config key '" + key + "'");
            it->second(value);
        }
    }

    void add_int(const std::string& key, int* target) {
        setters[key] = [key, target](const std::string& v) {
            try {
                *target = std::stoi(v);
            } catch (...) {
                throw_invalid("config key '" + key + "': expected integer, got '" + v + "'");
            }
        };
    }
    void add_u64(const std::string& key, uint64_t* target) {
        setters[key] = [key, target](const std::string& v) {
            try {
                *target = std::stoull(v);
            } catch (...) {
                throw_invalid("config key '" + key + "': expected integer, got '" + v + "'");
            }
        };
    }
    void add_double(const std::string& key, double* target) {
        setters[key] = [key, target](const std::string& v) {
            try {
                size_t pos = 0;
                *target = std::stod(v, &pos);
            } catch (...) {
                throw_invalid("config key '" + key + "': expected number, got '" + v + "'");
            }
        };
    }
    void add_string(const std::string& key, std::string* target) {
        setters[key] = [target](const std::string& v) { *target = v; };
    }
    void add_bool(const std::string& key, bool* target) {
        setters[key] = [key, target](const std::string& v) {
            if (v == "1" || v == "true")
                *target = true;
            else if (v == "0" || v == "false")
                *target = false;
            else
                throw_invalid("config key '" + key + "': expected 0/1/true/false, got '" + v + "'");
        };
    }
};

void atomic_rename(const std::string& tmp, const std::string& path) {
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw_io("rename " + tmp + " -> " + path + ": " + ec.message());
}

std::string frame_name(int t, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05d.%s", t, ext);
    return buf;
}

}  // namespace

KeyValues KeyValues::parse_text(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw_format(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw_format(origin + ":" + std::to_string(line_no) + ": empty key");
        kv.items.emplace_back(key, value);
    }
    return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
    return parse_text(read_text_file(path), path);
}

void KeyValues::append(const KeyValues& other) {
    items.insert(items.end(), other.items.begin(), other.items.end());
}

std::string KeyValues::canonical_text() const {
    // Later duplicates win; emit the effective configuration sorted by key.
    std::map<std::string, std::string> effective;
    for (const auto& [k, v] : items) effective[k] = v;
    std::string out;
    for (const auto& [k, v] : effective) out += k + " = " + v + "\n";
    return out;
}

TrainConfig train_config_from(const KeyValues& kv, int* threads) {
    TrainConfig cfg;
    int thread_req = 0;
    Schema s;
    s.add_int("total_iters", &cfg.total_iters);
    s.add_int("init_iters", &cfg.init_iters);
    s.add_int("joint_iters", &cfg.joint_iters);
    s.add_int("global_refine_interval", &cfg.global_refine_interval);
    s.add_int("pose_iters", &cfg.pose_iters);
    s.add_int("pose_refine_rounds", &cfg.pose_refine_rounds);
    s.add_int("densify_start_iter", &cfg.densify_start_iter);
    s.add_int("densify_interval", &cfg.densify_interval);
    s.add_int("densify_end_iter", &cfg.densify_end_iter);
    s.add_double("prune_opacity_threshold", &cfg.prune_opacity_threshold);
    s.add_double("densify_grad_threshold", &cfg.densify_grad_threshold);
    s.add_double("depth_prune_multiplier", &cfg.depth_prune_multiplier);
    s.add_int("m_blur", &cfg.m_blur);
    s.add_int("sh_degree", &cfg.sh_degree);
    s.add_int("pe_freqs_position", &cfg.pe_freqs_position);
    s.add_int("pe_freqs_view", &cfg.pe_freqs_view);
    s.add_double("lambda_p", &cfg.lambda_p);
    s.add_double("lambda_q", &cfg.lambda_q);
    s.add_double("lambda_image_mix", &cfg.loss.lambda_image_mix);
    s.add_double("lambda_depth", &cfg.loss.lambda_depth);
    s.add_double("lambda_pose", &cfg.loss.lambda_pose);
    s.add_double("eps_pose", &cfg.loss.eps_pose);
    s.add_double("lr_position", &cfg.lr_position);
    s.add_double("lr_sh", &cfg.lr_sh);
    s.add_double("lr_opacity", &cfg.lr_opacity);
    s.add_double("lr_scale", &cfg.lr_scale);
    s.add_double("lr_rotation", &cfg.lr_rotation);
    s.add_double("lr_mlp", &cfg.lr_mlp);
    s.add_double("lr_mlp_heads", &cfg.lr_mlp_heads);
    s.add_double("lr_rho", &cfg.lr_rho);
    s.add_double("lr_pose_rot", &cfg.lr_pose_rot);
    s.add_double("lr_pose_trans", &cfg.lr_pose_trans);
    s.add_double("lr_refine_rot", &cfg.lr_refine_rot);
    s.add_double("lr_refine_trans", &cfg.lr_refine_trans);
    s.add_int("densify_n_new", &cfg.densify.n_new);
    s.add_int("densify_k", &cfg.densify.k);
    s.add_double("densify_t_d", &cfg.densify.dist_threshold);
    s.add_bool("init_lock_geometry", &cfg.init_lock_geometry);
    s.add_int("bootstrap_points", &cfg.bootstrap_points);
    s.add_u64("seed", &cfg.seed);
    s.add_int("log_interval", &cfg.log_interval);
    s.add_int("threads", &thread_req);
    s.apply(kv);
    if (threads) *threads = thread_req;
    return cfg;
}

SynthSpec synth_spec_from(const KeyValues& kv, int* threads) {
    SynthSpec spec;
    int thread_req = 0;
    std::string kind = "camera_motion";
    int width = 64, height = 64;
    double fx = 70, fy = 70, cx = -1, cy = -1;
    Schema s;
    s.add_int("n_gaussians", &spec.scene.n_gaussians);
    s.add_double("extent", &spec.scene.extent);
    s.add_double("moving_fraction", &spec.scene.moving_fraction);
    s.add_int("n_frames", &spec.scene.n_frames);
    s.add_int("width", &width);
    s.add_int("height", &height);
    s.add_double("fx", &fx);
    s.add_double("fy", &fy);
    s.add_double("cx", &cx);
    s.add_double("cy", &cy);
    s.add_int("sh_degree", &spec.scene.sh_degree);
    s.add_u64("seed", &spec.scene.seed);
    s.add_string("blur_kind", &kind);
    s.add_int("n_sub", &spec.blur.n_sub);
    s.add_double("magnitude", &spec.blur.magnitude);
    s.add_int("threads", &thread_req);
    s.apply(kv);
    spec.blur.kind = blur_kind_from_string(kind);
    spec.scene.intrinsics.width = width;
    spec.scene.intrinsics.height = height;
    spec.scene.intrinsics.fx = fx;
    spec.scene.intrinsics.fy = fy;
    spec.scene.intrinsics.cx = cx < 0 ? width / 2.0 : cx;
    spec.scene.intrinsics.cy = cy < 0 ? height / 2.0 : cy;
    if (threads) *threads = thread_req;
    return spec;
}

void write_manifest(const std::string& path, const std::string& tool, uint64_t seed,
                    const std::string& config_text) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));

    json j;
    j["tool"] = tool;
    j["version"] = "0.1.0";
    j["seed"] = seed;
    j["config_hash"] = fnv1a_hex(config_text);
    j["rng"] = kRngAlgorithm;
    j["timestamp"] = stamp;
    write_text_file(path, j.dump(2) + "\n");
}

void run_synth(const std::string& spec_path, const std::string& out_dir) {
    const KeyValues kv = KeyValues::parse_file(spec_path);
    int threads = 0;
    const SynthSpec spec = synth_spec_from(kv, &threads);
    set_thread_count(threads);

    fs::create_directories(out_dir);
    const SynthScene scene = generate_scene(spec.scene);
    write_dataset(scene, spec.blur, out_dir);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), "synth", spec.scene.seed,
                   kv.canonical_text());
}

void run_train(const std::string& dataset_dir, const std::string& out_dir,
               const std::string& config_path, const std::string& overrides_text) {
    KeyValues kv;
    if (!config_path.empty()) kv = KeyValues::parse_file(config_path);
    kv.append(KeyValues::parse_text(overrides_text, "<overrides>"));
    int threads = 0;
    TrainConfig cfg = train_config_from(kv, &threads);
    set_thread_count(threads);
    fs::create_directories(out_dir);
    if (cfg.dump_dir.empty()) cfg.dump_dir = out_dir;

    const TrainDataset data = load_dataset(dataset_dir);
    GaussianCloud sparse = data.sparse;
    if (sparse.empty()) {
        require(!data.frames.empty() && data.frames[0].has_depth,
                "train: dataset has neither sparse.ply nor depth/00000.pfm to bootstrap from");
        sparse = bootstrap_sparse_cloud(data.frames[0].blurry, data.frames[0].depth, data.intr,
                                        cfg.bootstrap_points, cfg.sh_degree);
    }

    const TrainResult result = train_progressive(data, sparse, cfg);
    for (const std::string& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    const auto out = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
    save_ply(result.cloud, out("cloud.ply.tmp"),
             {std::string("generator=blursplat"), std::string("rng=") + kRngAlgorithm});
    atomic_rename(out("cloud.ply.tmp"), out("cloud.ply"));
    save_blurnet(result.net, out("blurnet.bin.tmp"));
    atomic_rename(out("blurnet.bin.tmp"), out("blurnet.bin"));
    save_trajectory(result.trajectory, out("traj.jsonl.tmp"));
    atomic_rename(out("traj.jsonl.tmp"), out("traj.jsonl"));
    save_metrics(result.metrics, out("metrics.jsonl.tmp"));
    atomic_rename(out("metrics.jsonl.tmp"), out("metrics.jsonl"));
    write_manifest(out("manifest.json"), "train", cfg.seed, kv.canonical_text());
}

void run_eval(const std::string& run_dir, const std::string& gt_dir,
              const std::string& report_path) {
    const GaussianCloud cloud = load_ply((fs::path(run_dir) / "cloud.ply").string());
    const Trajectory est = load_trajectory((fs::path(run_dir) / "traj.jsonl").string());
    const CameraIntrinsics intr = load_intrinsics_json((fs::path(gt_dir) / "intr.json").string());
    const Trajectory gt = load_trajectory((fs::path(gt_dir) / "gt_poses.jsonl").string());

    double psnr_sharp = 0, ssim_sharp = 0, psnr_blurry = 0;
    int count = 0;
    for (size_t t = 0; t < est.size(); ++t) {
        const fs::path sharp_path = fs::path(gt_dir) / "sharp" / frame_name(est.frame_ids[t], "png");
        const fs::path blurry_path = fs::path(gt_dir) / "frames" / frame_name(est.frame_ids[t], "png");
        if (!fs::exists(sharp_path)) continue;
        const ImageBuffer sharp_gt = load_png(sharp_path.string());
        const ImageBuffer rendered =
            render(cloud, est.poses[t], intr).color;
        psnr_sharp += psnr(rendered, sharp_gt);
        ssim_sharp += ssim(rendered, sharp_gt);
        if (fs::exists(blurry_path)) psnr_blurry += psnr(load_png(blurry_path.string()), sharp_gt);
        ++count;
    }
    require(count > 0, "eval: no ground-truth sharp frames found in " + gt_dir);

    require(est.size() == gt.size(), "eval: trajectory length does not match ground truth");
    const Alignment aligned = procrustes_align(est, gt);
    const TrajectoryMetrics tm = trajectory_metrics(aligned.aligned, gt);

    json j;
    j["psnr_sharp_mean"] = psnr_sharp / count;
    j["ssim_sharp_mean"] = ssim_sharp / count;
    j["psnr_blurry_mean"] = psnr_blurry / count;
    j["ate"] = tm.ate;
    j["rpe_t"] = tm.rpe_t;
    j["rpe_r"] = tm.rpe_r;
    write_text_file(report_path + ".tmp", j.dump(2) + "\n");
    atomic_rename(report_path + ".tmp", report_path);
}

}  // namespace bs
