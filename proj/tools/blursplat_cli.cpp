// blursplat command-line front end. Talks to the core exclusively through the
// public C API in blursplat/blursplat.h.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blursplat/blursplat.h"

namespace {

int fail(bs_status status) {
    std::fprintf(stderr, "error (%s): %s\n", bs_status_name(status), bs_last_error());
    return 2;
}

std::string overrides_text(const std::vector<std::string>& sets, const std::string& seed) {
    std::string text;
    for (const std::string& s : sets) text += s + "\n";
    if (!seed.empty()) text += "seed = " + seed + "\n";
    return text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blursplat — sparse-controlled Gaussian splatting with deblurring and "
                 "SfM-free camera tracking"};
    app.require_subcommand(1);

    int threads = 0;
    if (const char* env = std::getenv("BLURSPLAT_THREADS")) threads = std::atoi(env);
    app.add_option("--threads", threads, "Worker thread cap (0 = hardware default)");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
    std::string synth_spec, synth_out;
    synth->add_option("--spec", synth_spec, "key=value scene/blur spec file")->required();
    synth->add_option("--out", synth_out, "Output dataset directory")->required();

    auto* densify = app.add_subcommand("densify", "Expand a sparse cloud into a dense one");
    std::string densify_in, densify_out;
    bs_densify_params dparams{8, 4, 2.0, 42};
    densify->add_option("--in", densify_in, "Input sparse PLY")->required();
    densify->add_option("--out", densify_out, "Output dense PLY")->required();
    densify->add_option("--n-new", dparams.n_new, "Samples per sparse point");
    densify->add_option("--k", dparams.k, "KNN neighborhood size");
    densify->add_option("--t-d", dparams.dist_threshold, "Acceptance distance threshold");
    densify->add_option("--seed", dparams.seed, "Sampler seed");

    auto* train = app.add_subcommand("train", "Progressive deblur + camera tracking");
    std::string train_dataset, train_out, train_config, train_seed;
    std::vector<std::string> train_sets;
    train->add_option("--dataset", train_dataset, "Dataset directory")->required();
    train->add_option("--out", train_out, "Run output directory")->required();
    train->add_option("--config", train_config, "key=value config file");
    train->add_option("--seed", train_seed, "Seed override");
    train->add_option("--set", train_sets, "Config override, key=value (repeatable)");

    auto* render = app.add_subcommand("render", "Render a cloud from a pose");
    std::string render_cloud, render_pose, render_intr, render_out, render_depth;
    render->add_option("--cloud", render_cloud, "Input PLY")->required();
    render->add_option("--pose", render_pose, "Pose JSON")->required();
    render->add_option("--intr", render_intr, "Intrinsics JSON")->required();
    render->add_option("--out", render_out, "Output PNG")->required();
    render->add_option("--depth", render_depth, "Optional output depth PFM");

    auto* eval = app.add_subcommand("eval", "Score a run against ground truth");
    std::string eval_run, eval_gt, eval_report;
    eval->add_option("--run", eval_run, "Training run directory")->required();
    eval->add_option("--gt", eval_gt, "Ground-truth dataset directory")->required();
    eval->add_option("--out", eval_report, "Report path (default <run>/report.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    bs_set_threads(threads);

    if (synth->parsed()) {
        std::fprintf(stderr, "synth: %s -> %s\n", synth_spec.c_str(), synth_out.c_str());
        const bs_status st = bs_synth_run(synth_spec.c_str(), synth_out.c_str());
        return st == BS_OK ? 0 : fail(st);
    }

    if (densify->parsed()) {
        bs_cloud* sparse = nullptr;
        bs_status st = bs_cloud_load(densify_in.c_str(), &sparse);
        if (st != BS_OK) return fail(st);
        bs_cloud* dense = nullptr;
        st = bs_cloud_densify(sparse, &dparams, &dense);
        if (st == BS_OK) {
            std::fprintf(stderr, "densify: %zu -> %zu gaussians\n", bs_cloud_size(sparse),
                         bs_cloud_size(dense));
            st = bs_cloud_save(dense, densify_out.c_str());
        }
        bs_cloud_free(dense);
        bs_cloud_free(sparse);
        return st == BS_OK ? 0 : fail(st);
    }

    if (train->parsed()) {
        std::fprintf(stderr, "train: dataset=%s out=%s\n", train_dataset.c_str(),
                     train_out.c_str());
        const std::string overrides = overrides_text(train_sets, train_seed);
        const bs_status st =
            bs_train_run(train_dataset.c_str(), train_out.c_str(),
                         train_config.empty() ? nullptr : train_config.c_str(),
                         overrides.empty() ? nullptr : overrides.c_str());
        return st == BS_OK ? 0 : fail(st);
    }

    if (render->parsed()) {
        bs_cloud* cloud = nullptr;
        bs_status st = bs_cloud_load(render_cloud.c_str(), &cloud);
        if (st != BS_OK) return fail(st);
        st = bs_render_to_files(cloud, render_pose.c_str(), render_intr.c_str(),
                                render_out.c_str(),
                                render_depth.empty() ? nullptr : render_depth.c_str());
        bs_cloud_free(cloud);
        return st == BS_OK ? 0 : fail(st);
    }

    if (eval->parsed()) {
        const std::string report = eval_report.empty() ? eval_run + "/report.json" : eval_report;
        const bs_status st = bs_eval_run(eval_run.c_str(), eval_gt.c_str(), report.c_str());
        if (st == BS_OK) std::fprintf(stderr, "eval: wrote %s\n", report.c_str());
        return st == BS_OK ? 0 : fail(st);
    }
    return 1;
}
