#include "blursplat/blursplat.h"

#include <string>

#include "core/config.hpp"
#include "core/densify.hpp"
#include "core/error.hpp"
#include "core/image_io.hpp"
#include "core/json_io.hpp"
#include "core/parallel.hpp"
#include "core/ply.hpp"
#include "core/rasterizer.hpp"
#include "core/rng.hpp"

struct bs_cloud {
    bs::GaussianCloud cloud;
};

namespace {

thread_local std::string g_last_error;

bs_status status_of(const bs::Error& e) {
    switch (e.kind()) {
        case bs::ErrorKind::InvalidArgument: return BS_ERROR_INVALID_ARGUMENT;
        case bs::ErrorKind::Io: return BS_ERROR_IO;
        case bs::ErrorKind::Format: return BS_ERROR_FORMAT;
        case bs::ErrorKind::Numeric: return BS_ERROR_NUMERIC;
        case bs::ErrorKind::Internal: return BS_ERROR_INTERNAL;
    }
    return BS_ERROR_INTERNAL;
}

template <typename Fn>
bs_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return BS_OK;
    } catch (const bs::Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BS_ERROR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return BS_ERROR_INTERNAL;
    }
}

bs_status require_arg(bool ok, const char* message) {
    if (ok) return BS_OK;
    g_last_error = message;
    return BS_ERROR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* bs_version(void) { return "0.1.0"; }

const char* bs_status_name(bs_status status) {
    switch (status) {
        case BS_OK: return "ok";
        case BS_ERROR_INVALID_ARGUMENT: return "invalid argument";
        case BS_ERROR_IO: return "i/o error";
        case BS_ERROR_FORMAT: return "format error";
        case BS_ERROR_NUMERIC: return "numeric error";
        case BS_ERROR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* bs_last_error(void) { return g_last_error.c_str(); }

void bs_set_threads(int n) { bs::set_thread_count(n); }

bs_status bs_cloud_load(const char* ply_path, bs_cloud** out) {
    if (bs_status st = require_arg(ply_path && out, "bs_cloud_load: NULL argument")) return st;
    *out = nullptr;
    return guarded([&] { *out = new bs_cloud{bs::load_ply(ply_path)}; });
}

bs_status bs_cloud_save(const bs_cloud* cloud, const char* ply_path) {
    if (bs_status st = require_arg(cloud && ply_path, "bs_cloud_save: NULL argument")) return st;
    return guarded([&] {
        bs::save_ply(cloud->cloud, ply_path,
                     {std::string("generator=blursplat"), std::string("rng=") + bs::kRngAlgorithm});
    });
}

void bs_cloud_free(bs_cloud* cloud) { delete cloud; }

size_t bs_cloud_size(const bs_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }

int bs_cloud_sh_degree(const bs_cloud* cloud) { return cloud ? cloud->cloud.sh_degree : -1; }

bs_status bs_cloud_densify(const bs_cloud* sparse, const bs_densify_params* params,
                           bs_cloud** out) {
    if (bs_status st = require_arg(sparse && params && out, "bs_cloud_densify: NULL argument"))
        return st;
    *out = nullptr;
    return guarded([&] {
        bs::DensifyConfig cfg;
        cfg.n_new = params->n_new;
        cfg.k = params->k;
        cfg.dist_threshold = params->dist_threshold;
        cfg.seed = params->seed;
        *out = new bs_cloud{bs::densify_cloud(sparse->cloud, cfg)};
    });
}

bs_status bs_render_to_files(const bs_cloud* cloud, const char* pose_json, const char* intr_json,
                             const char* out_png, const char* out_depth_pfm) {
    if (bs_status st = require_arg(cloud && pose_json && intr_json && out_png,
                                   "bs_render_to_files: NULL argument"))
        return st;
    return guarded([&] {
        const bs::CameraPose pose = bs::load_pose_json(pose_json);
        const bs::CameraIntrinsics intr = bs::load_intrinsics_json(intr_json);
        const bs::RenderOutput out = bs::render(cloud->cloud, pose, intr);
        bs::save_png(out.color, out_png);
        if (out_depth_pfm) bs::save_pfm(out.depth, out_depth_pfm);
    });
}

bs_status bs_synth_run(const char* spec_path, const char* out_dir) {
    if (bs_status st = require_arg(spec_path && out_dir, "bs_synth_run: NULL argument")) return st;
    return guarded([&] { bs::run_synth(spec_path, out_dir); });
}

bs_status bs_train_run(const char* dataset_dir, const char* out_dir, const char* config_path,
                       const char* overrides) {
    if (bs_status st = require_arg(dataset_dir && out_dir, "bs_train_run: NULL argument"))
        return st;
    return guarded([&] {
        bs::run_train(dataset_dir, out_dir, config_path ? config_path : "",
                      overrides ? overrides : "");
    });
}

bs_status bs_eval_run(const char* run_dir, const char* gt_dir, const char* report_path) {
    if (bs_status st = require_arg(run_dir && gt_dir && report_path, "bs_eval_run: NULL argument"))
        return st;
    return guarded([&] { bs::run_eval(run_dir, gt_dir, report_path); });
}

}  // extern "C"
