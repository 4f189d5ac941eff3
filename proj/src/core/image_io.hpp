#pragma once

#include <string>

#include "core/types.hpp"

namespace bs {

// 8-bit PNG, no color management: value = byte / 255 (declared gamma 1.0).
ImageBuffer load_png(const std::string& path);
void save_png(const ImageBuffer& image, const std::string& path);

// Single-channel PFM, float32 little-endian, rows bottom-to-top.
DepthMap load_pfm(const std::string& path);
void save_pfm(const DepthMap& depth, const std::string& path);

}  // namespace bs
