/* blursplat — differentiable 3D Gaussian splatting toolkit, public C API.
 *
 * All functions returning bs_status set a thread-local message retrievable
 * with bs_last_error() on failure. Handles are opaque; every *_free is safe
 * on NULL. Option strings use the same `key = value` line format as config
 * files ('#' starts a comment).
 */
#ifndef BLURSPLAT_H
#define BLURSPLAT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BS_API __declspec(dllexport)
#else
#define BS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bs_status {
    BS_OK = 0,
    BS_ERROR_INVALID_ARGUMENT = 1,
    BS_ERROR_IO = 2,
    BS_ERROR_FORMAT = 3,
    BS_ERROR_NUMERIC = 4,
    BS_ERROR_INTERNAL = 5
} bs_status;

typedef struct bs_cloud bs_cloud;

BS_API const char* bs_version(void);
BS_API const char* bs_status_name(bs_status status);

/* Message from the most recent failing call on this thread; empty otherwise. */
BS_API const char* bs_last_error(void);

/* Caps the worker count for parallel sections; 0 restores the hardware default. */
BS_API void bs_set_threads(int n);

/* --- Gaussian clouds (binary little-endian PLY) --------------------------- */

BS_API bs_status bs_cloud_load(const char* ply_path, bs_cloud** out);
BS_API bs_status bs_cloud_save(const bs_cloud* cloud, const char* ply_path);
BS_API void bs_cloud_free(bs_cloud* cloud);
BS_API size_t bs_cloud_size(const bs_cloud* cloud);
BS_API int bs_cloud_sh_degree(const bs_cloud* cloud);

typedef struct bs_densify_params {
    int n_new;             /* samples per sparse point */
    int k;                 /* neighborhood size */
    double dist_threshold; /* nearest-sparse-neighbor acceptance radius */
    uint64_t seed;
} bs_densify_params;

BS_API bs_status bs_cloud_densify(const bs_cloud* sparse, const bs_densify_params* params,
                                  bs_cloud** out);

/* --- Rendering ------------------------------------------------------------ */

/* pose_json: {"q": [w,x,y,z], "t": [x,y,z]}; intr_json: {fx,fy,cx,cy,width,height}.
 * out_depth_pfm may be NULL to skip the depth map. */
BS_API bs_status bs_render_to_files(const bs_cloud* cloud, const char* pose_json,
                                    const char* intr_json, const char* out_png,
                                    const char* out_depth_pfm);

/* --- Pipelines ------------------------------------------------------------ */

/* Generates a synthetic benchmark dataset described by a key=value spec file. */
BS_API bs_status bs_synth_run(const char* spec_path, const char* out_dir);

/* Progressive deblur + tracking. config_path may be NULL; overrides may be
 * NULL or key=value lines applied on top of the config file. */
BS_API bs_status bs_train_run(const char* dataset_dir, const char* out_dir,
                              const char* config_path, const char* overrides);

/* Scores a training run against a ground-truth dataset directory. */
BS_API bs_status bs_eval_run(const char* run_dir, const char* gt_dir, const char* report_path);

#ifdef __cplusplus
}
#endif

#endif /* BLURSPLAT_H */
