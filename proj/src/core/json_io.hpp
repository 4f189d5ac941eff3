#pragma once

#include <string>

#include "core/types.hpp"

namespace bs {

// Minimal JSON objects: pose {"q":[w,x,y,z],"t":[x,y,z]},
// intrinsics {"fx","fy","cx","cy","width","height"}.
CameraPose load_pose_json(const std::string& path);
void save_pose_json(const CameraPose& pose, const std::string& path);

CameraIntrinsics load_intrinsics_json(const std::string& path);
void save_intrinsics_json(const CameraIntrinsics& intr, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a over the raw bytes, hex-encoded. Used for config hashes in manifests.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace bs
