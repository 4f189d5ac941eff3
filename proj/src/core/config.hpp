#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/synthbench.hpp"
#include "core/trainer.hpp"

namespace bs {

/// `key = value` lines, '#' comments. Later entries override earlier ones.
struct KeyValues {
    std::vector<std::pair<std::string, std::string>> items;

    static KeyValues parse_text(const std::string& text, const std::string& origin);
    static KeyValues parse_file(const std::string& path);
    void append(const KeyValues& other);
    std::string canonical_text() const;
};

/// Rejects unknown keys. "threads" is accepted and returned separately.
TrainConfig train_config_from(const KeyValues& kv, int* threads = nullptr);

struct SynthSpec {
    SceneSpec scene;
    BlurSpec blur;
};
SynthSpec synth_spec_from(const KeyValues& kv, int* threads = nullptr);

void write_manifest(const std::string& path, const std::string& tool, uint64_t seed,
                    const std::string& config_text);

// Pipeline entry points shared by the C API and the tests. All outputs are
// written via temp-file-then-rename.
void run_synth(const std::string& spec_path, const std::string& out_dir);
void run_train(const std::string& dataset_dir, const std::string& out_dir,
               const std::string& config_path, const std::string& overrides_text);
void run_eval(const std::string& run_dir, const std::string& gt_dir,
              const std::string& report_path);

}  // namespace bs
